#pragma once

// Paraproduct, Carleson embedding and the pseudo-BMO property of T*1.
//
// For a good component Q of the first lattice, R(Q) is the deepest transit
// cube R_1 of the second lattice such that Q lies in R_1, R_1 is a child of
// some R at least `gap` generations coarser than Q, and the same holds for
// every coarser ancestor of R_1. Summing c_{R_Q} over the transit pairs of Q
// telescopes to <g>_{R(Q)} when Lambda g = 0, so the paraproduct part of the
// transit sum equals <f, Pi_F g> with
//   Pi_F g = sum_Q <g>_{R(Q)} Delta_Q F.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "czkit/kernel.hpp"
#include "czkit/projections.hpp"

namespace czkit {

/// R(Q) as defined above; empty when Q is not inside a transit child of the
/// root (then no transit pair involves Q).
inline std::optional<Index> paraproduct_parent(const DyadicLattice& a, Index q, const DyadicLattice& b, int gap) {
  const Cube& cq = a.cube(q);
  std::optional<Index> best;
  for (int k = b.k_min(); k <= cq.generation - gap && k < b.k_max(); ++k) {
    const Index ch = b.cube_of(cq.members.front(), k + 1);
    const Cube& cc = b.cube(ch);
    if (!cc.transit() || !is_subset(cq.members, cc.members)) break;
    best = ch;
  }
  return best;
}

struct ParaproductResult {
  FunctionVector values;
  std::map<Index, double> a;      // a_R = sum over Q with R(Q) = R of ||Delta_Q F||^2
  double norm_sq = 0.0;           // ||Pi_F g||^2
  double identity_sum = 0.0;      // sum_R <g>_R^2 a_R
  std::size_t dropped = 0;        // components without R(Q)

  double identity_error() const {
    return std::abs(norm_sq - identity_sum) / std::max({norm_sq, identity_sum, 1e-300});
  }
};

/// Pi_F g over the given components of lattice a, with R(Q) taken in b.
inline ParaproductResult paraproduct_apply(const MetricMeasureSpace& space, const DyadicLattice& a,
                                           const DyadicLattice& b, const std::vector<Index>& components,
                                           std::span<const double> F, std::span<const double> g, int gap) {
  ParaproductResult res;
  res.values.assign(space.size(), 0.0);
  std::map<Index, double> avg;
  for (Index q : components) {
    const auto r = paraproduct_parent(a, q, b, gap);
    if (!r) {
      ++res.dropped;
      continue;
    }
    const auto dq = delta_local(space, a, F, q);
    const auto& mem = a.cube(q).members;
    double nq = 0.0;
    for (std::size_t i = 0; i < mem.size(); ++i) nq += dq[i] * dq[i] * space.mu(mem[i]);
    res.a[*r] += nq;
    auto it = avg.find(*r);
    if (it == avg.end()) it = avg.emplace(*r, average(space, b, g, *r)).first;
    for (std::size_t i = 0; i < mem.size(); ++i) res.values[mem[i]] += it->second * dq[i];
  }
  res.norm_sq = inner(space, res.values, res.values);
  for (const auto& [r, ar] : res.a) res.identity_sum += avg[r] * avg[r] * ar;
  return res;
}

// ---------------------------------------------------------------------------
// Carleson embedding

struct CarlesonReport {
  double constant = 0.0;     // max over S of sum_{R in S} a_R / mu(S)
  Index worst = 0;
  std::size_t skipped_zero_mass = 0;
  bool pass = true;
};

/// `a` is indexed by cube id; missing entries count as zero.
inline CarlesonReport carleson_embedding_check(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                               const std::map<Index, double>& a,
                                               std::optional<double> target = {}) {
  std::vector<double> sub(lat.size(), 0.0);
  for (const auto& [id, v] : a) {
    if (v < 0.0) throw Error(ErrorCode::InvalidInput, "Carleson weights must be nonnegative");
    sub.at(id) = v;
  }
  CarlesonReport rep;
  for (int k = lat.k_max(); k >= lat.k_min(); --k)
    for (Index id : lat.generation(k)) {
      const Cube& c = lat.cube(id);
      for (Index ch : c.children) sub[id] += sub[ch];
      const double mass = space.mu_of(c.members);
      if (mass <= 0.0) {
        if (sub[id] > 0.0) ++rep.skipped_zero_mass;
        continue;
      }
      if (sub[id] / mass > rep.constant) {
        rep.constant = sub[id] / mass;
        rep.worst = id;
      }
    }
  if (target) rep.pass = rep.constant <= *target * (1.0 + 1e-12);
  return rep;
}

// ---------------------------------------------------------------------------
// Pseudo-BMO

/// sum_{j>=1} Lambda^{(j+1)m} / (Lambda^j - 1)^{m+tau}, summed until the
/// terms fall below 1e-17 of the total.
inline double bmo_tail_series(double Lambda, double m, double tau) {
  double s = 0.0;
  for (int j = 1; j < 100000; ++j) {
    const double lj = std::pow(Lambda, j);
    const double term = std::pow(Lambda, (j + 1) * m) / std::pow(lj - 1.0, m + tau);
    s += term;
    if (j > 2 && term < 1e-17 * s) break;
  }
  return s;
}

/// C(K, Lambda, tau) bounding the oscillation of T*(1 outside Lambda Q) on Q.
inline double bmo_tail_constant(double C_CZ, double delta, double K, double Lambda, double m, double tau) {
  return C_CZ * std::max(1.0, 2.0 * std::pow(delta, -tau)) * K * bmo_tail_series(Lambda, m, tau);
}

/// Distances to a cube and its dilates {x : rho(x,Q) <= (s-1) diam Q}.
struct CubeDilation {
  std::vector<double> dist;
  double diam = 0.0;

  bool contains(Index x, double s) const { return dist[x] <= (s - 1.0) * diam; }
};

inline CubeDilation cube_dilation(const MetricMeasureSpace& space, const PointSet& members) {
  CubeDilation d;
  d.diam = set_diameter(space, members);
  d.dist.assign(space.size(), kInf);
  for (Index x = 0; x < space.size(); ++x) d.dist[x] = point_set_distance(space, x, members);
  return d;
}

struct BmoCube {
  Index id = 0;
  double oscillation_integral = 0.0;  // int_Q |F - <F>_Q|^2
  double mass_dilate = 0.0;           // mu(Lambda Q)
  double gate = 0.0;                  // max_j mu(Lambda^j Q) / (Lambda^j diam)^m
  double tail_osc = 0.0;
  double near = 0.0;                  // int_Q |T*(1 on Lambda Q)|^2
};

struct BmoReport {
  double Lambda = 1.4;
  double K = 0.0;
  bool K_calibrated = false;
  std::size_t admissible = 0;
  std::size_t gated_out = 0;
  bool vacuous = false;
  double C_fit = 0.0;
  Index worst = 0;
  // proof split, when the kernel is supplied
  bool split_checked = false;
  double A = 0.0;
  double C_tail = 0.0;         // C(K, Lambda, tau)
  double tail_worst = 0.0;     // max oscillation of the tail part
  double near_worst = 0.0;     // max int_Q |phi|^2 / (A mu(Lambda Q))
  bool tail_pass = true;
  bool near_pass = true;
  std::vector<BmoCube> cubes;

  double C_split() const { return 2.0 * C_tail * C_tail + 2.0 * A; }
};

/// Fits C in int_Q |F - <F>_Q|^2 <= C mu(Lambda Q) over transit cubes with
/// positive diameter passing the growth gate mu(sQ) <= K (s diam Q)^m for
/// s = Lambda^j, j >= 0. K <= 0 calibrates K as the largest gate ratio, so
/// that every such cube is admissible. With `k` given, F must be T*1 and the
/// split F = T*(1 on Lambda Q) + T*(1 off Lambda Q) is checked as well, with
/// A the T1 constant of the Lambda-dilated family.
inline BmoReport pseudo_bmo_check(const MetricMeasureSpace& space, const DyadicLattice& lat, std::span<const double> F,
                                  double Lambda, double K, double m, const KernelSpec* k = nullptr, double A = 0.0) {
  if (!(Lambda > 1.0)) throw Error(ErrorCode::InvalidInput, "Lambda must exceed 1");
  BmoReport rep;
  rep.Lambda = Lambda;
  std::vector<Index> cand;
  for (const auto& c : lat.cubes())
    if (c.transit() && c.members.size() > 1) cand.push_back(c.id);
  std::vector<BmoCube> info(cand.size());
  std::vector<char> usable(cand.size(), 0);
  const double X = space.diameter();
  parallel_for(cand.size(), [&](std::size_t i) {
    const Cube& c = lat.cube(cand[i]);
    const auto dil = cube_dilation(space, c.members);
    if (dil.diam <= 0.0) return;
    usable[i] = 1;
    BmoCube& b = info[i];
    b.id = c.id;
    for (double s = 1.0;; s *= Lambda) {
      double mass = 0.0;
      for (Index x = 0; x < space.size(); ++x)
        if (dil.contains(x, s)) mass += space.mu(x);
      b.gate = std::max(b.gate, mass / std::pow(s * dil.diam, m));
      if ((s - 1.0) * dil.diam >= X) break;
    }
    const double avg = mean_over(space, F, c.members);
    for (Index x : c.members) b.oscillation_integral += (F[x] - avg) * (F[x] - avg) * space.mu(x);
    for (Index x = 0; x < space.size(); ++x)
      if (dil.contains(x, Lambda)) b.mass_dilate += space.mu(x);
    if (!k) return;
    double lo = kInf, hi = -kInf;
    for (Index x : c.members) {
      if (space.mu(x) <= 0.0) continue;
      double near = 0.0, tail = 0.0;
      for (Index y = 0; y < space.size(); ++y) {
        if (space.mu(y) <= 0.0) continue;
        const double v = (*k)(y, x) * space.mu(y);
        if (dil.contains(y, Lambda)) near += v; else tail += v;
      }
      b.near += near * near * space.mu(x);
      lo = std::min(lo, tail);
      hi = std::max(hi, tail);
    }
    b.tail_osc = hi >= lo ? hi - lo : 0.0;
  }, 4);

  if (K <= 0.0) {
    rep.K_calibrated = true;
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (usable[i]) rep.K = std::max(rep.K, info[i].gate);
  } else {
    rep.K = K;
  }
  if (k) {
    rep.split_checked = true;
    rep.A = A;
    rep.C_tail = bmo_tail_constant(k->C_CZ, k->delta_CZ, rep.K, Lambda, k->m, k->tau);
  }
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (!usable[i]) continue;
    const BmoCube& b = info[i];
    if (b.gate > rep.K * (1.0 + 1e-12)) {
      ++rep.gated_out;
      continue;
    }
    ++rep.admissible;
    rep.cubes.push_back(b);
    if (b.mass_dilate > 0.0 && b.oscillation_integral / b.mass_dilate > rep.C_fit) {
      rep.C_fit = b.oscillation_integral / b.mass_dilate;
      rep.worst = b.id;
    }
    if (k) {
      rep.tail_worst = std::max(rep.tail_worst, b.tail_osc);
      if (b.mass_dilate > 0.0) {
        const double ratio = A > 0.0 ? b.near / (A * b.mass_dilate) : (b.near > 0.0 ? kInf : 0.0);
        rep.near_worst = std::max(rep.near_worst, ratio);
      }
    }
  }
  rep.vacuous = rep.admissible == 0;
  if (k) {
    rep.tail_pass = rep.tail_worst <= rep.C_tail * (1.0 + 1e-12);
    rep.near_pass = rep.near_worst <= 1.0 + 1e-12;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Whitney pieces

struct WhitneyReport {
  double multiplicity = 0.0;   // max overlap of the 1.4-dilated pieces at a mu-point
  double spill = 0.0;          // max over S of mu(union of 1.4P) / mu(S)
  double chain_ratio = 0.0;    // max over S of sum_P mu(1.4P) / mu(S)
  std::size_t uncovered = 0;   // components with no piece inside S
  std::size_t pieces = 0;
};

/// For every cube S of lattice b with components below it (R(Q) inside S),
/// each component Q is assigned the coarsest ancestor P in lattice a with
/// 1.5P inside S, reached by walking up from Q; P = Q when Q itself fails.
inline WhitneyReport whitney_pieces(const MetricMeasureSpace& space, const DyadicLattice& a, const DyadicLattice& b,
                                    const std::map<Index, std::vector<Index>>& comps_by_r) {
  WhitneyReport rep;
  std::map<Index, CubeDilation> dil;
  auto dilation = [&](Index p) -> const CubeDilation& {
    auto it = dil.find(p);
    if (it == dil.end()) it = dil.emplace(p, cube_dilation(space, a.cube(p).members)).first;
    return it->second;
  };
  auto inside = [&](Index p, double s, const std::vector<char>& in_s) {
    const auto& d = dilation(p);
    for (Index x = 0; x < space.size(); ++x)
      if (d.contains(x, s) && !in_s[x]) return false;
    return true;
  };
  // components under each cube of b
  std::map<Index, std::vector<Index>> under;
  for (const auto& [r, qs] : comps_by_r) {
    std::optional<Index> c = r;
    while (c) {
      auto& v = under[*c];
      v.insert(v.end(), qs.begin(), qs.end());
      c = b.cube(*c).parent;
    }
  }
  for (const auto& [s, qs] : under) {
    const Cube& cs = b.cube(s);
    const double ms = space.mu_of(cs.members);
    if (ms <= 0.0) continue;
    std::vector<char> in_s(space.size(), 0);
    for (Index x : cs.members) in_s[x] = 1;
    std::set<Index> pieces;
    for (Index q : qs) {
      Index p = q;
      if (!inside(q, 1.5, in_s)) {
        ++rep.uncovered;
      } else {
        while (a.cube(p).parent && inside(*a.cube(p).parent, 1.5, in_s)) p = *a.cube(p).parent;
      }
      pieces.insert(p);
    }
    rep.pieces += pieces.size();
    std::vector<int> count(space.size(), 0);
    double sum = 0.0;
    for (Index p : pieces) {
      const auto& d = dilation(p);
      for (Index x = 0; x < space.size(); ++x)
        if (d.contains(x, 1.4)) {
          ++count[x];
          sum += space.mu(x);
        }
    }
    double uni = 0.0;
    for (Index x = 0; x < space.size(); ++x) {
      if (space.mu(x) <= 0.0 || count[x] == 0) continue;
      uni += space.mu(x);
      rep.multiplicity = std::max(rep.multiplicity, static_cast<double>(count[x]));
    }
    rep.spill = std::max(rep.spill, uni / ms);
    rep.chain_ratio = std::max(rep.chain_ratio, sum / ms);
  }
  return rep;
}

}  // namespace czkit
