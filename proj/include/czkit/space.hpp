#pragma once

// Finite metric measure spaces: a point cloud with a quasi-metric, a
// reference measure nu, a probability measure mu and a distinguished open
// set omega. All checks here are exhaustive over the finite data.

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "czkit/common.hpp"

namespace czkit {

class MetricMeasureSpace {
 public:
  MetricMeasureSpace(std::vector<std::string> ids, Matrix rho, std::vector<double> nu,
                     std::vector<double> mu, std::vector<char> omega_mask, double quasi_const,
                     double resolution_h)
      : ids_(std::move(ids)),
        rho_(std::move(rho)),
        nu_(std::move(nu)),
        mu_(std::move(mu)),
        omega_(std::move(omega_mask)),
        quasi_const_(quasi_const),
        resolution_h_(resolution_h) {
    const std::size_t n = ids_.size();
    if (n == 0) throw Error(ErrorCode::InvalidInput, "space has no points");
    if (rho_.rows != n || rho_.cols != n || nu_.size() != n || mu_.size() != n ||
        omega_.size() != n)
      throw Error(ErrorCode::InvalidInput, "space arrays do not match the point count");
    if (quasi_const_ < 1.0) throw Error(ErrorCode::InvalidInput, "quasi_const must be >= 1");
    if (!(resolution_h_ > 0.0)) throw Error(ErrorCode::InvalidInput, "resolution_h must be > 0");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mu_[i] >= 0.0) || !(nu_[i] >= 0.0))
        throw Error(ErrorCode::InvalidInput, "measures must be nonnegative");
      total += mu_[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidInput, "mu weights must sum to 1 (got " + std::to_string(total) + ")");
    diam_ = 0.0;
    min_dist_ = kInf;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double d = rho_(i, j);
        if (!std::isfinite(d) || d < 0.0)
          throw Error(ErrorCode::InvalidInput, "distances must be finite and nonnegative");
        diam_ = std::max(diam_, d);
        if (i != j && d > 0.0) min_dist_ = std::min(min_dist_, d);
      }
    // Points within one resolution step, used by the discrete skeleton.
    h_neighbors_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && rho_(i, j) <= resolution_h_) h_neighbors_[i].push_back(j);
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  double rho(Index x, Index y) const { return rho_(x, y); }
  const Matrix& rho_matrix() const { return rho_; }
  double nu(Index x) const { return nu_[x]; }
  double mu(Index x) const { return mu_[x]; }
  const std::vector<double>& nu_weights() const { return nu_; }
  const std::vector<double>& mu_weights() const { return mu_; }
  bool in_omega(Index x) const { return omega_[x] != 0; }
  const std::vector<char>& omega_mask() const { return omega_; }
  double quasi_const() const { return quasi_const_; }
  double resolution_h() const { return resolution_h_; }
  double diameter() const { return diam_; }
  /// Smallest positive off-diagonal distance (infinity for a single point).
  double min_distance() const { return min_dist_; }
  const std::vector<Index>& h_neighbors(Index x) const { return h_neighbors_[x]; }

  bool omega_is_whole_space() const {
    return std::all_of(omega_.begin(), omega_.end(), [](char c) { return c != 0; });
  }

  double mu_of(const PointSet& s) const {
    double m = 0.0;
    for (Index i : s) m += mu_[i];
    return m;
  }
  double nu_of(const PointSet& s) const {
    double m = 0.0;
    for (Index i : s) m += nu_[i];
    return m;
  }

  PointSet all_points() const {
    PointSet s(size());
    std::iota(s.begin(), s.end(), Index{0});
    return s;
  }

  /// Copy with a different omega; everything else shared by value.
  MetricMeasureSpace with_omega(std::vector<char> omega_mask) const {
    return MetricMeasureSpace(ids_, rho_, nu_, mu_, std::move(omega_mask), quasi_const_, resolution_h_);
  }
  MetricMeasureSpace with_nu(std::vector<double> nu) const {
    return MetricMeasureSpace(ids_, rho_, std::move(nu), mu_, omega_, quasi_const_, resolution_h_);
  }

 private:
  std::vector<std::string> ids_;
  Matrix rho_;
  std::vector<double> nu_;
  std::vector<double> mu_;
  std::vector<char> omega_;
  double quasi_const_;
  double resolution_h_;
  double diam_ = 0.0;
  double min_dist_ = kInf;
  std::vector<std::vector<Index>> h_neighbors_;
};

/// Pairwise Euclidean distances of coordinate rows.
inline Matrix euclidean_distances(const std::vector<std::vector<double>>& coords) {
  const std::size_t n = coords.size();
  Matrix rho(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coords[i].size() != coords[j].size())
        throw Error(ErrorCode::InvalidInput, "coordinate rows differ in dimension");
      double s = 0.0;
      for (std::size_t a = 0; a < coords[i].size(); ++a) s += (coords[i][a] - coords[j][a]) * (coords[i][a] - coords[j][a]);
      rho(i, j) = rho(j, i) = std::sqrt(s);
    }
  return rho;
}

/// Euclidean space with ids "0".."N-1". Empty nu means unit weights, empty mu
/// means uniform, empty omega means no point in omega. A nonpositive h is
/// replaced by the minimal positive distance.
inline MetricMeasureSpace make_euclidean_space(const std::vector<std::vector<double>>& coords,
                                               std::vector<double> nu = {}, std::vector<double> mu = {},
                                               std::vector<char> omega = {}, double h = 0.0) {
  const std::size_t n = coords.size();
  if (n == 0) throw Error(ErrorCode::InvalidInput, "space has no points");
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  if (nu.empty()) nu.assign(n, 1.0);
  if (mu.empty()) mu.assign(n, 1.0 / static_cast<double>(n));
  if (omega.empty()) omega.assign(n, 0);
  Matrix rho = euclidean_distances(coords);
  if (!(h > 0.0)) {
    h = kInf;
    for (double d : rho.data)
      if (d > 0.0) h = std::min(h, d);
    if (!std::isfinite(h)) h = 1.0;
  }
  return MetricMeasureSpace(std::move(ids), std::move(rho), std::move(nu), std::move(mu), std::move(omega), 1.0, h);
}

/// Normalizes nonnegative weights to a probability vector.
inline std::vector<double> normalized(std::vector<double> w) {
  double s = 0.0;
  for (double v : w) s += v;
  if (!(s > 0.0)) throw Error(ErrorCode::ZeroMass, "weights sum to zero");
  for (double& v : w) v /= s;
  // push the rounding residue into the largest weight so the sum is 1 to 1e-15
  double t = 0.0;
  for (double v : w) t += v;
  *std::max_element(w.begin(), w.end()) += 1.0 - t;
  return w;
}

/// L2(mu) norm and inner product of functions on the points.
inline double l2_norm(const MetricMeasureSpace& space, std::span<const double> f) {
  double s = 0.0;
  for (Index x = 0; x < f.size(); ++x) s += f[x] * f[x] * space.mu(x);
  return std::sqrt(s);
}

inline double inner(const MetricMeasureSpace& space, std::span<const double> f, std::span<const double> g) {
  double s = 0.0;
  for (Index x = 0; x < f.size(); ++x) s += f[x] * g[x] * space.mu(x);
  return s;
}

// ---------------------------------------------------------------------------
// Set geometry

inline double set_distance(const MetricMeasureSpace& space, const PointSet& a, const PointSet& b) {
  double d = kInf;
  for (Index x : a)
    for (Index y : b) d = std::min(d, space.rho(x, y));
  return d;
}

inline double point_set_distance(const MetricMeasureSpace& space, Index x, const PointSet& b) {
  double d = kInf;
  for (Index y : b) d = std::min(d, space.rho(x, y));
  return d;
}

inline double set_diameter(const MetricMeasureSpace& space, const PointSet& a) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) d = std::max(d, space.rho(a[i], a[j]));
  return d;
}

inline PointSet complement(const MetricMeasureSpace& space, const PointSet& a) {
  PointSet out;
  out.reserve(space.size() - std::min(space.size(), a.size()));
  std::size_t k = 0;
  for (Index i = 0; i < space.size(); ++i) {
    if (k < a.size() && a[k] == i) {
      ++k;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

/// Open ball {y : rho(x,y) < r}.
inline PointSet ball(const MetricMeasureSpace& space, Index x, double r) {
  PointSet out;
  for (Index y = 0; y < space.size(); ++y)
    if (space.rho(x, y) < r) out.push_back(y);
  return out;
}

inline double ball_mu(const MetricMeasureSpace& space, Index x, double r) {
  double m = 0.0;
  for (Index y = 0; y < space.size(); ++y)
    if (space.rho(x, y) < r) m += space.mu(y);
  return m;
}

inline double ball_nu(const MetricMeasureSpace& space, Index x, double r) {
  double m = 0.0;
  for (Index y = 0; y < space.size(); ++y)
    if (space.rho(x, y) < r) m += space.nu(y);
  return m;
}

/// lambda E := {x : rho(x,E) <= (lambda - 1) diam(E)}; always contains E.
inline PointSet dilate(const MetricMeasureSpace& space, const PointSet& e, double lambda) {
  if (e.empty()) throw Error(ErrorCode::EmptySet, "dilate of an empty set");
  if (lambda < 1.0) throw Error(ErrorCode::InvalidInput, "dilation factor must be >= 1");
  const double reach = (lambda - 1.0) * set_diameter(space, e);
  PointSet out;
  for (Index x = 0; x < space.size(); ++x)
    if (point_set_distance(space, x, e) <= reach) out.push_back(x);
  return out;
}

/// d(x) = dist(x, X \ omega). Infinite when omega is the whole space.
inline double dist_to_complement(const MetricMeasureSpace& space, Index x) {
  double d = kInf;
  for (Index y = 0; y < space.size(); ++y)
    if (!space.in_omega(y)) d = std::min(d, space.rho(x, y));
  return d;
}

inline std::vector<double> dist_to_complement_all(const MetricMeasureSpace& space) {
  std::vector<double> d(space.size());
  for (Index x = 0; x < space.size(); ++x) d[x] = dist_to_complement(space, x);
  return d;
}

// ---------------------------------------------------------------------------
// Quasi-metric check

struct QuasiMetricReport {
  bool ok = true;
  bool symmetric = true;
  bool identity = true;
  bool triangle = true;
  /// Maximally violating triple (x, y, z); meaningful when !ok.
  Index x = 0, y = 0, z = 0;
  /// Worst observed rho(x,z) / (rho(x,y) + rho(y,z)).
  double worst_ratio = 0.0;
};

inline QuasiMetricReport verify_quasi_metric(const MetricMeasureSpace& space) {
  QuasiMetricReport rep;
  const std::size_t n = space.size();
  double worst_sym = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double a = space.rho(i, j);
      const double b = space.rho(j, i);
      const double asym = std::abs(a - b);
      if (asym > 1e-12 * std::max(1.0, std::max(a, b)) && asym > worst_sym) {
        worst_sym = asym;
        rep.symmetric = false;
        rep.x = i; rep.y = j; rep.z = i;
      }
      if ((i == j) != (a == 0.0) && rep.identity) {
        rep.identity = false;
        if (rep.symmetric) { rep.x = i; rep.y = j; rep.z = j; }
      }
    }
  Index bx = 0, by = 0, bz = 0;
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y)
      for (Index z = 0; z < n; ++z) {
        const double denom = space.rho(x, y) + space.rho(y, z);
        const double lhs = space.rho(x, z);
        if (lhs == 0.0) continue;
        const double ratio = denom > 0.0 ? lhs / denom : kInf;
        if (ratio > rep.worst_ratio) {
          rep.worst_ratio = ratio;
          bx = x; by = y; bz = z;
        }
      }
  rep.triangle = rep.worst_ratio <= space.quasi_const() * (1.0 + 1e-12);
  if (!rep.triangle && rep.symmetric && rep.identity) {
    rep.x = bx; rep.y = by; rep.z = bz;
  }
  rep.ok = rep.symmetric && rep.identity && rep.triangle;
  return rep;
}

// ---------------------------------------------------------------------------
// Radii sampling

/// Geometric grid h, h/kappa, h/kappa^2, ... capped by diam(X), plus diam(X).
inline std::vector<double> geometric_radii(const MetricMeasureSpace& space, double kappa = 0.5) {
  std::vector<double> radii;
  const double diam = space.diameter();
  const double h = space.resolution_h();
  if (diam <= 0.0) return {h};
  for (double r = h; r < diam * (1.0 - 1e-12); r /= kappa) radii.push_back(r);
  radii.push_back(diam);
  return radii;
}

/// Every distinct positive distance plus a value just above it (open balls
/// change only there); the exact fallback for the geometric grid.
inline std::vector<double> exhaustive_radii(const MetricMeasureSpace& space) {
  std::vector<double> radii;
  const auto& rho = space.rho_matrix().data;
  for (double d : rho)
    if (d >= space.resolution_h() * (1.0 - 1e-12)) radii.push_back(d);
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  std::vector<double> out;
  for (double d : radii) {
    out.push_back(d);
    out.push_back(std::nextafter(d, kInf));
  }
  if (out.empty()) out.push_back(space.resolution_h());
  return out;
}

// ---------------------------------------------------------------------------
// Ahlfors regularity of nu

struct RegularityViolation {
  Index point;
  double radius;
  double measured;
  double bound;
};

struct RegularityReport {
  double c1 = kInf;
  double c2 = 0.0;
  double n_dim = 0.0;
  double c_doub = 0.0;
  bool degenerate = false;
  std::vector<RegularityViolation> violations;
};

inline double doubling_constant(double c1, double c2, double n_dim) {
  return (c2 / c1) * std::pow(2.0, n_dim);
}

inline RegularityReport check_ahlfors_regularity(const MetricMeasureSpace& space, double n_dim,
                                                 const std::vector<double>& radii,
                                                 std::optional<std::pair<double, double>> target = {}) {
  if (radii.empty()) throw Error(ErrorCode::EmptyRadiusList, "no radii supplied");
  RegularityReport rep;
  rep.n_dim = n_dim;
  for (Index x = 0; x < space.size(); ++x)
    for (double r : radii) {
      const double ratio = ball_nu(space, x, r) / std::pow(r, n_dim);
      rep.c1 = std::min(rep.c1, ratio);
      rep.c2 = std::max(rep.c2, ratio);
      if (target) {
        if (ratio < target->first)
          rep.violations.push_back({x, r, ratio, target->first});
        else if (ratio > target->second)
          rep.violations.push_back({x, r, ratio, target->second});
      }
    }
  rep.degenerate = space.size() < 2 || space.diameter() <= 0.0 || !(rep.c1 > 0.0);
  rep.c_doub = rep.degenerate ? kInf : doubling_constant(rep.c1, rep.c2, n_dim);
  return rep;
}

// ---------------------------------------------------------------------------
// Growth condition (H) for mu and the non-Ahlfors balls

struct BallRef {
  Index center;
  double radius;
  double mass;
};

struct GrowthReport {
  double m = 0.0;
  double c_h = 0.0;
  std::vector<BallRef> non_ahlfors;
};

inline GrowthReport check_growth_condition(const MetricMeasureSpace& space, double m,
                                           const std::vector<double>& radii) {
  if (!(m > 0.0)) throw Error(ErrorCode::InvalidInput, "growth exponent m must be > 0");
  GrowthReport rep;
  rep.m = m;
  for (Index x = 0; x < space.size(); ++x)
    for (double r : radii) {
      const double mass = ball_mu(space, x, r);
      const double rm = std::pow(r, m);
      rep.c_h = std::max(rep.c_h, mass / rm);
      if (mass > rm) rep.non_ahlfors.push_back({x, r, mass});
    }
  return rep;
}

struct CaptureReport {
  bool ok = true;
  std::optional<BallRef> witness;
  std::optional<Index> escaped_point;
};

inline CaptureReport verify_omega_capture(const MetricMeasureSpace& space, const GrowthReport& growth) {
  CaptureReport rep;
  for (const auto& b : growth.non_ahlfors) {
    for (Index y : ball(space, b.center, b.radius))
      if (!space.in_omega(y)) {
        rep.ok = false;
        rep.witness = b;
        rep.escaped_point = y;
        return rep;
      }
  }
  return rep;
}

inline CaptureReport verify_omega_capture(const MetricMeasureSpace& space, double m) {
  return verify_omega_capture(space, check_growth_condition(space, m, geometric_radii(space)));
}

/// Union of all non-Ahlfors balls, as an omega mask.
inline std::vector<char> non_ahlfors_cover(const MetricMeasureSpace& space, const GrowthReport& growth) {
  std::vector<char> mask(space.size(), 0);
  for (const auto& b : growth.non_ahlfors)
    for (Index y : ball(space, b.center, b.radius)) mask[y] = 1;
  return mask;
}

/// Omega mask containing every non-Ahlfors ball B(x,r) over all real
/// r >= resolution_h. The mass of B(x,r) is constant between consecutive
/// mu-distances from x, so the supremum of bad radii at x is found exactly.
inline std::vector<char> growth_cover(const MetricMeasureSpace& space, double m) {
  if (!(m > 0.0)) throw Error(ErrorCode::InvalidInput, "growth exponent m must be > 0");
  std::vector<Index> support;
  for (Index y = 0; y < space.size(); ++y)
    if (space.mu(y) > 0.0) support.push_back(y);
  std::vector<char> mask(space.size(), 0);
  std::vector<std::pair<double, double>> dm(support.size());
  for (Index x = 0; x < space.size(); ++x) {
    for (std::size_t i = 0; i < support.size(); ++i) dm[i] = {space.rho(x, support[i]), space.mu(support[i])};
    std::sort(dm.begin(), dm.end());
    double reach = 0.0, cum = 0.0;
    for (std::size_t i = 0; i < dm.size(); ++i) {
      cum += dm[i].second;
      if (i + 1 < dm.size() && dm[i + 1].first == dm[i].first) continue;
      const double crit = std::pow(cum, 1.0 / m);
      if (crit <= std::max(dm[i].first, space.resolution_h())) continue;
      const double next = i + 1 < dm.size() ? dm[i + 1].first : kInf;
      reach = std::max(reach, std::min(next, crit));
    }
    if (reach > 0.0)
      for (Index y = 0; y < space.size(); ++y)
        if (space.rho(x, y) < reach) mask[y] = 1;
  }
  return mask;
}

}  // namespace czkit
