#pragma once

// Christ-type dyadic lattices on a finite space.
//
// Generation k has scale kappa^k; larger k is finer. Cubes are built from
// nested greedy nets: the net at generation k is a maximal kappa^k-separated
// set containing the net of generation k-1, every point goes to its nearest
// center, and a generation-k cube is the union of the generation-(k+1) cubes
// whose centers fall in its Voronoi region. The coarsest generation is a
// single root cube and the finest consists of singletons.

#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "czkit/parallel.hpp"
#include "czkit/space.hpp"

namespace czkit {

enum class GoodBad { Unclassified, Good, Bad };

struct Cube {
  Index id = 0;
  int generation = 0;
  PointSet members;
  Index center = 0;
  std::optional<Index> parent;
  std::vector<Index> children;
  double size = 1.0;
  bool classified = false;  // terminal/transit flag valid
  bool terminal = false;
  GoodBad goodness = GoodBad::Unclassified;

  bool transit() const { return classified && !terminal; }
  bool leaf() const { return children.empty(); }
};

class DyadicLattice {
 public:
  DyadicLattice() = default;

  /// Assembles a lattice from explicit cubes. No validation beyond indexing;
  /// use verify_lattice_properties for that.
  static DyadicLattice from_cubes(const MetricMeasureSpace& space, double kappa, std::vector<Cube> cubes,
                                  std::uint64_t seed = 0, double eta = 0.5) {
    DyadicLattice lat;
    lat.kappa_ = kappa;
    lat.seed_ = seed;
    lat.eta_ = eta;
    lat.cubes_ = std::move(cubes);
    lat.index(space);
    return lat;
  }

  double kappa() const { return kappa_; }
  std::uint64_t seed() const { return seed_; }
  double eta() const { return eta_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  int depth() const { return k_max_ - k_min_; }
  double scale(int k) const { return std::pow(kappa_, k); }

  std::size_t size() const { return cubes_.size(); }
  const std::vector<Cube>& cubes() const { return cubes_; }
  const Cube& cube(Index id) const { return cubes_.at(id); }
  Cube& cube_mut(Index id) { return cubes_.at(id); }
  Index root() const { return root_; }

  const std::vector<Index>& generation(int k) const { return by_gen_.at(static_cast<std::size_t>(k - k_min_)); }

  /// Cube of generation k containing point x.
  Index cube_of(Index x, int k) const { return point_cube_.at(static_cast<std::size_t>(k - k_min_)).at(x); }

  /// Discrete skeleton of R, cached at indexing time.
  const PointSet& skeleton(Index id) const { return skeletons_.at(id); }

  bool classified() const { return !cubes_.empty() && cubes_[root_].classified; }

  /// Ancestor of cube `id` at generation k (k <= generation of id).
  Index ancestor(Index id, int k) const {
    Index c = id;
    while (cubes_[c].generation > k) c = *cubes_[c].parent;
    return c;
  }

  void index(const MetricMeasureSpace& space) {
    if (cubes_.empty()) throw Error(ErrorCode::InvalidInput, "lattice without cubes");
    k_min_ = cubes_[0].generation;
    k_max_ = cubes_[0].generation;
    for (Index i = 0; i < cubes_.size(); ++i) {
      cubes_[i].id = i;
      k_min_ = std::min(k_min_, cubes_[i].generation);
      k_max_ = std::max(k_max_, cubes_[i].generation);
    }
    const auto ngen = static_cast<std::size_t>(k_max_ - k_min_ + 1);
    by_gen_.assign(ngen, {});
    point_cube_.assign(ngen, std::vector<Index>(space.size(), Index(-1)));
    for (const auto& c : cubes_) {
      const auto g = static_cast<std::size_t>(c.generation - k_min_);
      by_gen_[g].push_back(c.id);
      for (Index x : c.members)
        if (point_cube_[g][x] == Index(-1)) point_cube_[g][x] = c.id;
    }
    root_ = by_gen_[0].front();
    skeletons_.assign(cubes_.size(), {});
    for (const auto& c : cubes_) {
      if (c.children.empty()) continue;
      PointSet sk;
      for (Index ch : c.children) {
        const auto& mem = cubes_[ch].members;
        for (Index x : mem)
          for (Index y : space.h_neighbors(x))
            if (!std::binary_search(mem.begin(), mem.end(), y)) {
              sk.push_back(x);
              break;
            }
      }
      std::sort(sk.begin(), sk.end());
      skeletons_[c.id] = std::move(sk);
    }
  }

 private:
  double kappa_ = 0.5;
  std::uint64_t seed_ = 0;
  double eta_ = 0.5;
  int k_min_ = 0;
  int k_max_ = 0;
  Index root_ = 0;
  std::vector<Cube> cubes_;
  std::vector<std::vector<Index>> by_gen_;
  std::vector<std::vector<Index>> point_cube_;
  std::vector<PointSet> skeletons_;
};

/// Builds a randomized lattice. `k_min`, when given, requests a coarsest
/// generation; the range is widened so that the top generation is a single
/// root and the bottom generation consists of singletons.
inline DyadicLattice build_lattice(const MetricMeasureSpace& space, double kappa, std::uint64_t seed,
                                   std::optional<int> k_min = {}, double eta = 0.5) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(ErrorCode::InvalidInput, "kappa must lie in (0,1)");
  const std::size_t n = space.size();
  const double diam = space.diameter();
  const double min_dist = space.min_distance();
  const double log_k = std::log(kappa);

  if (k_min && std::pow(kappa, *k_min) < space.resolution_h())
    throw Error(ErrorCode::DegenerateScale, "kappa^k_min is below resolution_h");

  int top = 0;
  int bottom = 0;
  if (n == 1 || diam <= 0.0) {
    top = k_min.value_or(0);
    bottom = top;
  } else {
    top = static_cast<int>(std::floor(std::log(diam) / log_k));
    while (std::pow(kappa, top) <= diam) --top;
    while (std::pow(kappa, top + 1) > diam) ++top;
    if (k_min) top = std::min(top, *k_min);
    bottom = static_cast<int>(std::ceil(std::log(min_dist) / log_k));
    while (std::pow(kappa, bottom) >= min_dist) ++bottom;
    while (bottom - 1 > top && std::pow(kappa, bottom - 1) < min_dist) --bottom;
    bottom = std::max(bottom, top);
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto ngen = static_cast<std::size_t>(bottom - top + 1);
  std::vector<std::vector<Index>> nets(ngen);
  std::vector<std::vector<Index>> voronoi(ngen, std::vector<Index>(n));
  std::vector<char> is_center(n, 0);
  std::vector<double> dist_to_net(n, kInf);
  std::vector<Index> nearest(n, Index(-1));
  for (std::size_t g = 0; g < ngen; ++g) {
    const double sep = std::pow(kappa, top + static_cast<int>(g));
    for (Index p : order) {
      if (is_center[p] || dist_to_net[p] < sep) continue;
      is_center[p] = 1;
      nets[g].push_back(p);
      // nearest center so far; ties keep the lower id
      for (Index y = 0; y < n; ++y) {
        const double d = space.rho(p, y);
        if (d < dist_to_net[y] || (d == dist_to_net[y] && p < nearest[y])) {
          dist_to_net[y] = d;
          nearest[y] = p;
        }
      }
    }
    if (g > 0) nets[g].insert(nets[g].end(), nets[g - 1].begin(), nets[g - 1].end());
    std::sort(nets[g].begin(), nets[g].end());
    voronoi[g] = nearest;
  }

  std::vector<Cube> cubes;
  // center -> cube id, per generation
  std::vector<std::map<Index, Index>> cube_at(ngen);
  // finest generation: Voronoi cells
  {
    const std::size_t g = ngen - 1;
    std::map<Index, PointSet> cells;
    for (Index y = 0; y < n; ++y) cells[voronoi[g][y]].push_back(y);
    for (auto& [c, mem] : cells) {
      Cube q;
      q.generation = bottom;
      q.center = c;
      q.members = std::move(mem);
      q.size = std::pow(kappa, bottom);
      cube_at[g][c] = cubes.size();
      q.id = cubes.size();
      cubes.push_back(std::move(q));
    }
  }
  for (std::size_t g = ngen - 1; g-- > 0;) {
    std::map<Index, std::vector<Index>> kids;
    for (auto& [c, id] : cube_at[g + 1]) kids[voronoi[g][c]].push_back(id);
    for (auto& [c, ids] : kids) {
      Cube q;
      q.generation = top + static_cast<int>(g);
      q.center = c;
      q.size = std::pow(kappa, q.generation);
      q.id = cubes.size();
      for (Index ch : ids) {
        q.members.insert(q.members.end(), cubes[ch].members.begin(), cubes[ch].members.end());
        cubes[ch].parent = q.id;
      }
      std::sort(q.members.begin(), q.members.end());
      q.children = ids;
      cube_at[g][c] = q.id;
      cubes.push_back(std::move(q));
    }
  }
  // Renumber coarse-to-fine so that ids increase with generation.
  std::vector<Index> perm(cubes.size());
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    if (cubes[a].generation != cubes[b].generation) return cubes[a].generation < cubes[b].generation;
    return cubes[a].center < cubes[b].center;
  });
  std::vector<Index> new_id(cubes.size());
  for (Index i = 0; i < perm.size(); ++i) new_id[perm[i]] = i;
  std::vector<Cube> sorted(cubes.size());
  for (Index i = 0; i < perm.size(); ++i) {
    Cube q = std::move(cubes[perm[i]]);
    q.id = i;
    if (q.parent) q.parent = new_id[*q.parent];
    for (auto& ch : q.children) ch = new_id[ch];
    std::sort(q.children.begin(), q.children.end());
    sorted[i] = std::move(q);
  }
  DyadicLattice lat = DyadicLattice::from_cubes(space, kappa, std::move(sorted), seed, eta);
  return lat;
}

// ---------------------------------------------------------------------------
// Property verification

struct LatticeReport {
  bool covering = true;   // (i)
  bool nesting = true;    // (ii)
  bool ancestry = true;   // (iii)
  bool single_root = true;
  double c_diam = 0.0;    // (iv) max diam / kappa^k
  double a0 = kInf;       // (v) min dist(center, X \ Q) / kappa^k
  double c6 = 0.0;        // (vi) fitted small-boundary constant
  double eta = 0.0;
  std::optional<std::pair<Index, Index>> overlap_witness;
  std::vector<std::string> failures;

  bool ok() const { return covering && nesting && ancestry && single_root && a0 > 0.0; }
};

inline LatticeReport verify_lattice_properties(const DyadicLattice& lat, const MetricMeasureSpace& space) {
  LatticeReport rep;
  rep.eta = lat.eta();
  const std::size_t n = space.size();
  if (lat.generation(lat.k_min()).size() != 1) {
    rep.single_root = false;
    rep.failures.push_back("coarsest generation has more than one cube");
  }
  for (int k = lat.k_min(); k <= lat.k_max(); ++k) {
    std::vector<int> count(n, 0);
    std::vector<Index> owner(n, Index(-1));
    for (Index id : lat.generation(k))
      for (Index x : lat.cube(id).members) {
        if (count[x]++ > 0 && !rep.overlap_witness) {
          rep.nesting = false;
          rep.overlap_witness = std::make_pair(owner[x], id);
          rep.failures.push_back("cubes " + std::to_string(owner[x]) + " and " + std::to_string(id) +
                                 " overlap at generation " + std::to_string(k));
        }
        owner[x] = id;
      }
    for (Index x = 0; x < n; ++x)
      if (count[x] == 0 && space.nu(x) > 0.0) {
        rep.covering = false;
        rep.failures.push_back("point " + std::to_string(x) + " uncovered at generation " + std::to_string(k));
        break;
      }
  }
  for (const auto& c : lat.cubes()) {
    if (c.generation > lat.k_min()) {
      if (!c.parent) {
        rep.ancestry = false;
        rep.failures.push_back("cube " + std::to_string(c.id) + " has no parent");
      } else {
        const auto& p = lat.cube(*c.parent);
        if (p.generation != c.generation - 1 || !is_subset(c.members, p.members)) {
          rep.ancestry = false;
          rep.failures.push_back("cube " + std::to_string(c.id) + " not nested in its parent");
        }
        // (ii): no other cube of the parent generation may meet it
        for (Index other : lat.generation(p.generation))
          if (other != p.id && intersects(lat.cube(other).members, c.members)) {
            rep.nesting = false;
            if (!rep.overlap_witness) rep.overlap_witness = std::make_pair(other, c.id);
          }
      }
    }
    PointSet kids;
    for (Index ch : c.children)
      kids.insert(kids.end(), lat.cube(ch).members.begin(), lat.cube(ch).members.end());
    std::sort(kids.begin(), kids.end());
    if (!c.children.empty() && kids != c.members) {
      rep.nesting = false;
      rep.failures.push_back("children of cube " + std::to_string(c.id) + " do not partition it");
    }
    const double s = lat.scale(c.generation);
    rep.c_diam = std::max(rep.c_diam, set_diameter(space, c.members) / s);
    const PointSet out = complement(space, c.members);
    const double reach = out.empty() ? kInf : point_set_distance(space, c.center, out);
    rep.a0 = std::min(rep.a0, reach / s);
    // (vi) for t in {kappa, kappa^2, kappa^3}
    const double nu_q = space.nu_of(c.members);
    if (nu_q > 0.0 && !out.empty()) {
      for (int p = 1; p <= 3; ++p) {
        const double t = std::pow(lat.kappa(), p);
        double layer = 0.0;
        for (Index x : c.members)
          if (point_set_distance(space, x, out) <= t * s) layer += space.nu(x);
        rep.c6 = std::max(rep.c6, layer / (std::pow(t, lat.eta()) * nu_q));
      }
    }
  }
  return rep;
}

/// Discrete skeleton: points of a child lying within one resolution step of
/// leaving that child. Empty for leaves.
inline PointSet skeleton(const DyadicLattice& lat, Index r) { return lat.skeleton(r); }

// ---------------------------------------------------------------------------
// Terminal / transit

struct TransitReport {
  std::size_t n_terminal = 0;
  std::size_t n_transit = 0;
  /// Fitted constant in mu(B(z_Q, r)) <= C r^m over transit Q and r >= s(Q).
  double growth_constant = 0.0;
  double m = 0.0;
};

/// A cube is terminal when its parent lies in omega or it has zero mu-mass.
inline bool is_terminal_by_definition(const DyadicLattice& lat, const MetricMeasureSpace& space, const Cube& c) {
  if (space.mu_of(c.members) <= 0.0) return true;
  if (!c.parent) return false;
  for (Index x : lat.cube(*c.parent).members)
    if (!space.in_omega(x)) return false;
  return true;
}

inline TransitReport classify_terminal_transit(DyadicLattice& lat, const MetricMeasureSpace& space, double m) {
  TransitReport rep;
  rep.m = m;
  for (Index id = 0; id < lat.size(); ++id) {
    Cube& c = lat.cube_mut(id);
    c.terminal = is_terminal_by_definition(lat, space, c);
    c.classified = true;
    if (c.terminal) ++rep.n_terminal; else ++rep.n_transit;
  }
  if (lat.cube(lat.root()).terminal)
    throw Error(ErrorCode::RootTerminal, "the root cube carries no mu-mass");
  const double diam = std::max(space.diameter(), space.resolution_h());
  for (const auto& c : lat.cubes()) {
    if (!c.transit()) continue;
    for (double r = c.size; ; r *= 2.0) {
      rep.growth_constant = std::max(rep.growth_constant, ball_mu(space, c.center, r) / std::pow(r, m));
      if (r >= diam) break;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Good / bad cubes

/// Exponent alpha = tau / (2 tau + 2 m).
inline double goodness_exponent(double tau, double m) { return tau / (2.0 * tau + 2.0 * m); }

/// Smallest positive integer r with kappa^r <= delta^S.
inline int scale_gap(double kappa, double delta, int s_param) {
  const double target = std::pow(delta, s_param);
  int r = 1;
  while (std::pow(kappa, r) > target * (1.0 + 1e-12)) ++r;
  return r;
}

struct GoodBadResult {
  bool bad = false;
  std::optional<Index> witness;
  double distance = kInf;
  double threshold = 0.0;
};

/// Q (in `lat`) is bad iff some R in `other`, at least `gap` generations
/// coarser, has dist(Q, sk R) < s(Q)^alpha s(R)^(1-alpha).
inline GoodBadResult classify_good_bad(const DyadicLattice& lat, Index q, const DyadicLattice& other,
                                       const MetricMeasureSpace& space, double alpha, int gap) {
  GoodBadResult res;
  const Cube& cq = lat.cube(q);
  const int coarsest_allowed = cq.generation - gap;
  for (int k = other.k_min(); k <= std::min(coarsest_allowed, other.k_max()); ++k) {
    const double thr = std::pow(cq.size, alpha) * std::pow(other.scale(k), 1.0 - alpha);
    for (Index rid : other.generation(k)) {
      const PointSet& sk = other.skeleton(rid);
      if (sk.empty()) continue;
      double d = kInf;
      for (Index x : cq.members) {
        for (Index y : sk) {
          d = std::min(d, space.rho(x, y));
          if (d < thr) break;
        }
        if (d < thr) break;
      }
      if (d < thr) {
        res.bad = true;
        res.witness = rid;
        res.distance = d;
        res.threshold = thr;
        return res;
      }
    }
  }
  return res;
}

/// Coarsest generation at which each point lies on a skeleton of `other`;
/// INT_MAX for points that never do.
inline std::vector<int> skeleton_generation(const DyadicLattice& other, std::size_t n) {
  std::vector<int> gen(n, std::numeric_limits<int>::max());
  for (const auto& r : other.cubes())
    for (Index y : other.skeleton(r.id)) gen[y] = std::min(gen[y], r.generation);
  return gen;
}

/// min over x in `members` of rho(x, y), for every y.
inline std::vector<double> distance_profile(const MetricMeasureSpace& space, const PointSet& members) {
  std::vector<double> d(space.size(), kInf);
  for (Index x : members)
    for (Index y = 0; y < space.size(); ++y) d[y] = std::min(d[y], space.rho(x, y));
  return d;
}

/// Same answer as classify_good_bad, from a precomputed distance profile of Q
/// and the skeleton generations of the other lattice. The threshold grows
/// as R gets coarser, so only the coarsest skeleton generation of each point
/// needs testing.
inline bool is_bad(const std::vector<double>& profile, int generation, double size, double kappa,
                   const std::vector<int>& skel_gen, double alpha, int gap) {
  const double sa = std::pow(size, alpha);
  for (Index y = 0; y < profile.size(); ++y) {
    const int k = skel_gen[y];
    if (k > generation - gap) continue;
    if (profile[y] < sa * std::pow(kappa, k * (1.0 - alpha))) return true;
  }
  return false;
}

/// Marks every cube of `lat` good or bad against `other`.
inline std::size_t classify_all_good_bad(DyadicLattice& lat, const DyadicLattice& other,
                                         const MetricMeasureSpace& space, double alpha, int gap) {
  if (std::abs(lat.kappa() - other.kappa()) > 1e-15)
    throw Error(ErrorCode::InvalidInput, "lattices must share kappa");
  const auto skel_gen = skeleton_generation(other, space.size());
  std::vector<char> bad(lat.size(), 0);
  parallel_for(lat.size(), [&](std::size_t id) {
    const Cube& c = lat.cube(id);
    if (c.generation - gap < other.k_min()) return;
    bad[id] = is_bad(distance_profile(space, c.members), c.generation, c.size, lat.kappa(), skel_gen, alpha, gap);
  }, 8);
  std::size_t n_bad = 0;
  for (Index id = 0; id < lat.size(); ++id) {
    lat.cube_mut(id).goodness = bad[id] ? GoodBad::Bad : GoodBad::Good;
    n_bad += bad[id];
  }
  return n_bad;
}

}  // namespace czkit
