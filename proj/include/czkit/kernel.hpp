#pragma once

// Calderon-Zygmund kernels on a finite space and the discretized operator
//   (T f)(x) = sum_y k(x,y) f(y) mu(y).
// Kernels are materialized as dense N x N matrices; the diagonal entry is
// set by the diagonal policy.

#include <random>
#include <string>

#include "czkit/lattice.hpp"
#include "czkit/parallel.hpp"

namespace czkit {

enum class DiagonalPolicy { Zero, Truncate };

struct KernelSpec {
  std::string type = "explicit";
  Matrix values;  // k(x,y), diagonal per policy
  DiagonalPolicy diagonal = DiagonalPolicy::Zero;
  double m = 1.0;
  double tau = 1.0;
  double C_CZ = 1.0;
  double delta_CZ = 0.5;
  bool dominated_by_d = false;
  double scale = 1.0;  // family amplitude c

  std::size_t size() const { return values.rows; }
  double operator()(Index x, Index y) const { return values(x, y); }

  KernelSpec scaled(double c) const {
    KernelSpec out = *this;
    for (double& v : out.values.data) v *= c;
    out.C_CZ *= std::abs(c);
    out.scale *= c;
    return out;
  }

  KernelSpec transposed() const {
    KernelSpec out = *this;
    out.values = values.transposed();
    return out;
  }
};

inline void validate_kernel(const KernelSpec& k, std::size_t n) {
  if (k.values.rows != n || k.values.cols != n)
    throw Error(ErrorCode::InvalidInput, "kernel matrix does not match the space size");
  for (double v : k.values.data)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteKernelValue, "kernel value is not finite");
  if (!(k.m > 0.0) || !(k.tau > 0.0) || !(k.C_CZ >= 0.0) || !(k.delta_CZ > 0.0 && k.delta_CZ <= 1.0))
    throw Error(ErrorCode::InvalidInput, "kernel constants out of range");
}

// ---------------------------------------------------------------------------
// Families. The declared smoothness constants below assume rho satisfies the
// triangle inequality (quasi_const == 1); check_size_and_smoothness fits the
// actual constants either way.

namespace detail {
// sup over 0 < t <= delta of ((1-t)^-m - 1) / t^tau, bounded in closed form
// by max(m,1) / (1-delta)^m * t^(1-tau) <= max(m,1) / (1-delta)^m.
inline double power_smoothness(double m, double delta) { return std::max(m, 1.0) / std::pow(1.0 - delta, m); }
}  // namespace detail

/// k(x,y) = c / rho(x,y)^m.
inline KernelSpec power_kernel(const MetricMeasureSpace& space, double c, double m, double tau = 1.0,
                               double delta = 0.5, DiagonalPolicy policy = DiagonalPolicy::Zero) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidInput, "tau must lie in (0,1]");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::InvalidInput, "power kernel needs delta in (0,1)");
  const std::size_t n = space.size();
  KernelSpec k;
  k.type = "power";
  k.values = Matrix(n, n);
  k.diagonal = policy;
  k.m = m;
  k.tau = tau;
  k.delta_CZ = delta;
  k.scale = c;
  k.C_CZ = std::abs(c) * std::max(1.0, detail::power_smoothness(m, delta));
  const double h = space.resolution_h();
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y) {
      if (x == y) k.values(x, y) = policy == DiagonalPolicy::Truncate ? c / std::pow(h, m) : 0.0;
      else k.values(x, y) = c / std::pow(space.rho(x, y), m);
    }
  validate_kernel(k, n);
  return k;
}

/// Bergman-type model k(x,y) = c / (max(d(x),d(y)) + rho(x,y))^m with
/// d = dist(., X \ omega). It has size constant c and is dominated by
/// c / max(d(x),d(y))^m; when omega is the whole space it reduces to the
/// power kernel.
inline KernelSpec bergman_kernel(const MetricMeasureSpace& space, double c, double m, double tau = 1.0,
                                 double delta = 0.5, DiagonalPolicy policy = DiagonalPolicy::Zero) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidInput, "tau must lie in (0,1]");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::InvalidInput, "bergman kernel needs delta in (0,1)");
  const std::size_t n = space.size();
  const auto d = dist_to_complement_all(space);
  KernelSpec k;
  k.type = "bergman";
  k.values = Matrix(n, n);
  k.diagonal = policy;
  k.m = m;
  k.tau = tau;
  k.delta_CZ = delta;
  k.scale = c;
  k.dominated_by_d = std::abs(c) <= 1.0;
  // d is 1-Lipschitz, so D = max(d(x),d(y)) + rho moves by at most 2 rho(x,x')
  k.C_CZ = std::abs(c) * std::max(1.0, 2.0 * detail::power_smoothness(m, delta));
  const double h = space.resolution_h();
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y) {
      const double dm = std::max(d[x], d[y]);
      if (!std::isfinite(dm)) {
        if (x == y) k.values(x, y) = policy == DiagonalPolicy::Truncate ? c / std::pow(h, m) : 0.0;
        else k.values(x, y) = c / std::pow(space.rho(x, y), m);
        continue;
      }
      if (x == y) k.values(x, y) = policy == DiagonalPolicy::Truncate ? c / std::pow(dm + h, m) : 0.0;
      else k.values(x, y) = c / std::pow(dm + space.rho(x, y), m);
    }
  validate_kernel(k, n);
  return k;
}

/// Averaging kernel k = c. Size constant c diam^m, no smoothness cost.
inline KernelSpec constant_kernel(const MetricMeasureSpace& space, double c, double m = 1.0,
                                  DiagonalPolicy policy = DiagonalPolicy::Truncate) {
  const std::size_t n = space.size();
  KernelSpec k;
  k.type = "constant";
  k.values = Matrix(n, n, c);
  k.diagonal = policy;
  if (policy == DiagonalPolicy::Zero)
    for (Index x = 0; x < n; ++x) k.values(x, x) = 0.0;
  k.m = m;
  k.tau = 1.0;
  k.scale = c;
  k.C_CZ = std::abs(c) * std::max(1.0, std::pow(space.diameter(), m));
  validate_kernel(k, n);
  return k;
}

inline KernelSpec zero_kernel(const MetricMeasureSpace& space, double m = 1.0) {
  KernelSpec k;
  k.type = "zero";
  k.values = Matrix(space.size(), space.size());
  k.m = m;
  k.C_CZ = 0.0;
  k.scale = 0.0;
  k.dominated_by_d = true;
  return k;
}

/// Explicit values. When c_cz <= 0 the constant is fitted from the data.
inline KernelSpec explicit_kernel(const MetricMeasureSpace& space, Matrix values, double m, double tau,
                                  double delta, double c_cz, DiagonalPolicy policy = DiagonalPolicy::Truncate);

// ---------------------------------------------------------------------------
// Operator application

/// Tf(x) = sum_y k(x,y) f(y) mu(y).
inline FunctionVector apply(const KernelSpec& k, const MetricMeasureSpace& space, std::span<const double> f) {
  const std::size_t n = space.size();
  if (f.size() != n || k.size() != n) throw Error(ErrorCode::InvalidInput, "size mismatch in apply");
  std::vector<double> w(n);
  for (Index y = 0; y < n; ++y) w[y] = f[y] * space.mu(y);
  FunctionVector out(n, 0.0);
  parallel_for(n, [&](std::size_t x) {
    const auto row = k.values.row(x);
    double s = 0.0;
    for (Index y = 0; y < n; ++y)
      if (w[y] != 0.0) s += row[y] * w[y];
    out[x] = s;
  });
  for (double v : out)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteKernelValue, "non-finite value in T f");
  return out;
}

/// T*g(x) = sum_y k(y,x) g(y) mu(y).
inline FunctionVector adjoint_apply(const KernelSpec& k, const MetricMeasureSpace& space,
                                    std::span<const double> g) {
  const std::size_t n = space.size();
  if (g.size() != n || k.size() != n) throw Error(ErrorCode::InvalidInput, "size mismatch in adjoint_apply");
  std::vector<double> w(n);
  for (Index y = 0; y < n; ++y) w[y] = g[y] * space.mu(y);
  FunctionVector out(n, 0.0);
  parallel_for(n, [&](std::size_t x) {
    double s = 0.0;
    for (Index y = 0; y < n; ++y)
      if (w[y] != 0.0) s += k.values(y, x) * w[y];
    out[x] = s;
  });
  for (double v : out)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteKernelValue, "non-finite value in T* g");
  return out;
}

/// T applied to the indicator of a point set.
inline FunctionVector apply_indicator(const KernelSpec& k, const MetricMeasureSpace& space, const PointSet& e,
                                      bool adjoint = false) {
  const std::size_t n = space.size();
  FunctionVector out(n, 0.0);
  for (Index x = 0; x < n; ++x) {
    double s = 0.0;
    for (Index y : e)
      if (space.mu(y) != 0.0) s += (adjoint ? k.values(y, x) : k.values(x, y)) * space.mu(y);
    out[x] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Size and smoothness

struct SmoothnessReport {
  double C_size = 0.0;      // max |k(x,y)| rho(x,y)^m over x != y
  double C_smooth_x = 0.0;  // max |k(x,y) - k(x',y)| rho(x,y)^(m+tau) / rho(x,x')^tau
  double C_smooth_y = 0.0;  // same in the second variable
  std::size_t triples = 0;
  double C_CZ = 0.0;
  bool pass = false;

  double C_smooth() const { return std::max(C_smooth_x, C_smooth_y); }
};

/// Exhaustive fit over all pairs and all triples in the smoothness regime
/// rho(x,x') <= delta_CZ rho(x,y). The diagonal entry never enters.
inline SmoothnessReport check_size_and_smoothness(const KernelSpec& k, const MetricMeasureSpace& space) {
  const std::size_t n = space.size();
  SmoothnessReport rep;
  rep.C_CZ = k.C_CZ;
  const double m = k.m;
  const double tau = k.tau;
  const double delta = k.delta_CZ;
  std::vector<double> cx(n, 0.0), cy(n, 0.0), cs(n, 0.0);
  std::vector<std::size_t> cnt(n, 0);
  parallel_for(n, [&](std::size_t x) {
    for (Index y = 0; y < n; ++y) {
      if (y == x) continue;
      const double r = space.rho(x, y);
      cs[x] = std::max(cs[x], std::abs(k(x, y)) * std::pow(r, m));
      const double base = std::pow(r, m + tau);
      for (Index xp = 0; xp < n; ++xp) {
        if (xp == x) continue;
        const double rr = space.rho(x, xp);
        if (rr > delta * r) continue;
        ++cnt[x];
        if (xp != y) cx[x] = std::max(cx[x], std::abs(k(x, y) - k(xp, y)) * base / std::pow(rr, tau));
      }
      for (Index yp = 0; yp < n; ++yp) {
        if (yp == y || yp == x) continue;
        const double rr = space.rho(y, yp);
        if (rr > delta * r) continue;
        cy[x] = std::max(cy[x], std::abs(k(x, y) - k(x, yp)) * base / std::pow(rr, tau));
      }
    }
  }, 1);
  for (Index x = 0; x < n; ++x) {
    rep.C_size = std::max(rep.C_size, cs[x]);
    rep.C_smooth_x = std::max(rep.C_smooth_x, cx[x]);
    rep.C_smooth_y = std::max(rep.C_smooth_y, cy[x]);
    rep.triples += cnt[x];
  }
  const double tol = 1e-12 * std::max(1.0, k.C_CZ);
  rep.pass = rep.C_size <= k.C_CZ + tol && rep.C_smooth() <= k.C_CZ + tol;
  return rep;
}

inline KernelSpec explicit_kernel(const MetricMeasureSpace& space, Matrix values, double m, double tau,
                                  double delta, double c_cz, DiagonalPolicy policy) {
  KernelSpec k;
  k.type = "explicit";
  k.values = std::move(values);
  k.diagonal = policy;
  if (policy == DiagonalPolicy::Zero)
    for (Index x = 0; x < k.values.rows && x < k.values.cols; ++x) k.values(x, x) = 0.0;
  k.m = m;
  k.tau = tau;
  k.delta_CZ = delta;
  k.C_CZ = std::max(c_cz, 0.0);
  validate_kernel(k, space.size());
  if (c_cz <= 0.0) {
    const auto fit = check_size_and_smoothness(k, space);
    k.C_CZ = std::max(fit.C_size, fit.C_smooth());
  }
  return k;
}

// ---------------------------------------------------------------------------
// Domination by d

struct DominationReport {
  bool pass = true;
  double worst_ratio = 0.0;  // max |k(x,y)| max(d(x),d(y))^m over finite-d pairs
  Index x = 0, y = 0;
  /// Scale-corrected terminal bound: max over terminal cubes Q and x != y in Q
  /// of |k(x,y)| s(parent Q)^m. Zero when no lattice is supplied.
  double terminal_constant = 0.0;
  std::size_t terminal_cubes = 0;
};

inline DominationReport check_d_domination(const KernelSpec& k, const MetricMeasureSpace& space, double m,
                                           const DyadicLattice* lattice = nullptr) {
  if (space.omega_is_whole_space())
    throw Error(ErrorCode::OmegaIsWholeSpace, "d-domination needs omega to be a proper subset");
  const std::size_t n = space.size();
  const auto d = dist_to_complement_all(space);
  DominationReport rep;
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y) {
      if (x == y) continue;
      const double dm = std::max(d[x], d[y]);
      if (dm <= 0.0) continue;  // bound is +inf
      const double ratio = std::abs(k(x, y)) * std::pow(dm, m);
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.x = x;
        rep.y = y;
      }
    }
  rep.pass = rep.worst_ratio <= 1.0 + 1e-12;
  if (lattice) {
    for (const auto& c : lattice->cubes()) {
      if (!c.classified || !c.terminal || !c.parent) continue;
      ++rep.terminal_cubes;
      const double sp = lattice->cube(*c.parent).size;
      for (Index x : c.members)
        for (Index y : c.members)
          if (x != y) rep.terminal_constant = std::max(rep.terminal_constant, std::abs(k(x, y)) * std::pow(sp, m));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// T1 testing condition

struct T1Family {
  double lambda = 1.0;  // 1 means the cubes themselves
  double A_direct = 0.0;
  double A_adjoint = 0.0;
  std::size_t sets = 0;
};

struct T1Report {
  double A = 0.0;
  double A_direct = 0.0;
  double A_adjoint = 0.0;
  Index worst_cube_direct = 0;
  Index worst_cube_adjoint = 0;
  std::vector<double> ratio_direct;   // per lattice cube, undilated; 0 when mu(Q) = 0
  std::vector<double> ratio_adjoint;
  std::vector<T1Family> families;
};

inline double t1_ratio(const KernelSpec& k, const MetricMeasureSpace& space, const PointSet& e, bool adjoint,
                       double mass) {
  const auto t = apply_indicator(k, space, e, adjoint);
  double s = 0.0;
  for (Index x = 0; x < space.size(); ++x) s += t[x] * t[x] * space.mu(x);
  return s / mass;
}

/// Fits A over lattice cubes and their lambda-dilations.
inline T1Report check_T1(const KernelSpec& k, const MetricMeasureSpace& space, const DyadicLattice& lat,
                         std::vector<double> lambdas = {1.2, 1.4, 1.5}) {
  T1Report rep;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  lambdas.erase(std::remove_if(lambdas.begin(), lambdas.end(), [](double l) { return l <= 1.0; }), lambdas.end());
  lambdas.insert(lambdas.begin(), 1.0);

  const std::size_t nc = lat.size();
  rep.ratio_direct.assign(nc, 0.0);
  rep.ratio_adjoint.assign(nc, 0.0);
  for (double lambda : lambdas) {
    std::vector<double> rd(nc, 0.0), ra(nc, 0.0);
    std::vector<char> used(nc, 0);
    parallel_for(nc, [&](std::size_t id) {
      const auto& c = lat.cube(id);
      const PointSet set = lambda == 1.0 ? c.members : dilate(space, c.members, lambda);
      const double mass = space.mu_of(set);
      if (mass <= 0.0) return;
      used[id] = 1;
      rd[id] = t1_ratio(k, space, set, false, mass);
      ra[id] = t1_ratio(k, space, set, true, mass);
    }, 4);
    T1Family fam;
    fam.lambda = lambda;
    for (Index id = 0; id < nc; ++id) {
      if (!used[id]) continue;
      ++fam.sets;
      fam.A_direct = std::max(fam.A_direct, rd[id]);
      fam.A_adjoint = std::max(fam.A_adjoint, ra[id]);
      if (rd[id] > rep.A_direct) {
        rep.A_direct = rd[id];
        rep.worst_cube_direct = id;
      }
      if (ra[id] > rep.A_adjoint) {
        rep.A_adjoint = ra[id];
        rep.worst_cube_adjoint = id;
      }
    }
    if (lambda == 1.0) {
      rep.ratio_direct = rd;
      rep.ratio_adjoint = ra;
    }
    rep.families.push_back(fam);
  }
  rep.A = std::max(rep.A_direct, rep.A_adjoint);
  return rep;
}

// ---------------------------------------------------------------------------
// Operator norm on L2(mu)

struct NormResult {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;  // ||B v - lambda v|| / lambda at exit, B = M^T M
};

/// Power iteration for the largest singular value of M = D^1/2 K D^1/2
/// restricted to supp mu; that singular value is the L2(mu) operator norm.
/// Stops when the eigen-residual of M^T M falls below tol relative to the
/// current Rayleigh quotient.
inline NormResult operator_norm(const KernelSpec& k, const MetricMeasureSpace& space, double tol = 1e-8,
                                std::size_t max_iter = 100000, std::uint64_t seed = 0) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidInput, "tolerance must be positive");
  std::vector<Index> support;
  for (Index x = 0; x < space.size(); ++x)
    if (space.mu(x) > 0.0) support.push_back(x);
  const std::size_t s = support.size();
  NormResult res;
  if (s == 0) {
    res.converged = true;
    return res;
  }
  Matrix M(s, s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j)
      M(i, j) = std::sqrt(space.mu(support[i])) * k(support[i], support[j]) * std::sqrt(space.mu(support[j]));
  bool all_zero = std::all_of(M.data.begin(), M.data.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    res.converged = true;
    return res;
  }

  std::mt19937_64 rng(seed);
  std::vector<double> v(s), w(s), u(s);
  for (auto& e : v) e = uniform01(rng) + 0.5;
  {
    const double nv = norm2(v);
    for (auto& e : v) e /= nv;
  }
  auto matvec = [&](const std::vector<double>& in, std::vector<double>& out, bool transpose) {
    parallel_for(s, [&](std::size_t i) {
      double acc = 0.0;
      if (transpose)
        for (std::size_t j = 0; j < s; ++j) acc += M(j, i) * in[j];
      else
        for (std::size_t j = 0; j < s; ++j) acc += M(i, j) * in[j];
      out[i] = acc;
    }, 128);
  };
  double lambda = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    matvec(v, w, false);
    matvec(w, u, true);  // u = M^T M v
    lambda = dot(u, v);
    double r2 = 0.0;
    for (std::size_t i = 0; i < s; ++i) r2 += (u[i] - lambda * v[i]) * (u[i] - lambda * v[i]);
    res.iterations = it;
    res.residual = lambda > 0.0 ? std::sqrt(r2) / lambda : kInf;
    const double nu = norm2(u);
    if (nu == 0.0) {
      // v fell in the kernel of M; restart from a fresh random vector
      for (auto& e : v) e = uniform01(rng) - 0.5;
      const double nv = norm2(v);
      for (auto& e : v) e /= nv;
      continue;
    }
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < s; ++i) v[i] = u[i] / nu;
  }
  res.value = std::sqrt(std::max(lambda, 0.0));
  return res;
}

}  // namespace czkit
