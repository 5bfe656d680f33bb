#pragma once

// The good-part bilinear form <T f_good, g_good> and its exact regrouping.
//
// f is decomposed on the first lattice and g on the second. Pairs (Q,R) with
// Q at least as fine as R make up the first half, evaluated with kernel T.
// Pairs with R strictly finer make up the symmetric half, which is the first
// half of the transposed kernel with lattices and functions exchanged. Inside
// a half, with k = gen(Q) - gen(R) and r the scale gap:
//
//   k <  r: Diagonal if dist(Q,R) <= s(R), else Far
//   k >= r: Far if Q and R are disjoint; Terminal or Transit when Q sits in
//           one child R_Q of R, by the flag of R_Q; Straddle otherwise.
//
// Straddle pairs cannot occur for continuum cubes, whose boundaries are thin;
// on a point cloud a fine cube may cross the partition of a coarse one.

#include <cmath>
#include <map>
#include <vector>

#include "czkit/kernel.hpp"
#include "czkit/projections.hpp"

namespace czkit {

/// D(Q,R) = s(Q) + s(R) + dist(Q,R), with dist over the full member sets.
inline double dqr_distance(const MetricMeasureSpace& space, const Cube& q, const Cube& r) {
  return q.size + r.size + set_distance(space, q.members, r.members);
}

enum class PairKind { Diagonal, Far, Terminal, Transit, Straddle };

inline const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::Diagonal: return "diagonal";
    case PairKind::Far: return "far";
    case PairKind::Terminal: return "terminal";
    case PairKind::Transit: return "transit";
    case PairKind::Straddle: return "straddle";
  }
  return "unknown";
}

/// Two lattices classified terminal/transit and good/bad against each other.
struct LatticePair {
  DyadicLattice d1;
  DyadicLattice d2;
  int gap = 1;
  double alpha = 0.25;
};

inline LatticePair make_lattice_pair(const MetricMeasureSpace& space, double m, double kappa, std::uint64_t seed1,
                                     std::uint64_t seed2, double alpha, int gap) {
  LatticePair lp;
  lp.d1 = build_lattice(space, kappa, seed1);
  lp.d2 = build_lattice(space, kappa, seed2);
  classify_terminal_transit(lp.d1, space, m);
  classify_terminal_transit(lp.d2, space, m);
  classify_all_good_bad(lp.d1, lp.d2, space, alpha, gap);
  classify_all_good_bad(lp.d2, lp.d1, space, alpha, gap);
  lp.gap = gap;
  lp.alpha = alpha;
  return lp;
}

/// A component cube seen through supp mu.
struct CubeInfo {
  Index id = 0;
  int generation = 0;
  double size = 0.0;
  double mass = 0.0;
  Index center = 0;
  double rad = 0.0;               // max rho(y, center) over the mu-support
  PointSet support;               // members with mu > 0
  std::vector<std::size_t> pos;   // their positions in the member list
};

inline CubeInfo cube_info(const MetricMeasureSpace& space, const DyadicLattice& lat, Index id) {
  const Cube& c = lat.cube(id);
  CubeInfo ci;
  ci.id = id;
  ci.generation = c.generation;
  ci.size = c.size;
  ci.center = c.center;
  for (std::size_t i = 0; i < c.members.size(); ++i) {
    const Index x = c.members[i];
    if (space.mu(x) <= 0.0) continue;
    ci.support.push_back(x);
    ci.pos.push_back(i);
    ci.mass += space.mu(x);
    ci.rad = std::max(ci.rad, space.rho(x, c.center));
  }
  return ci;
}

/// Good cubes carrying a martingale component.
inline std::vector<Index> good_components(const DyadicLattice& lat) {
  std::vector<Index> out;
  for (const auto& c : lat.cubes()) {
    if (!c.classified || c.goodness == GoodBad::Unclassified)
      throw Error(ErrorCode::ClassificationMissing, "lattice is not fully classified");
    if (c.transit() && !c.leaf() && c.goodness == GoodBad::Good) out.push_back(c.id);
  }
  return out;
}

struct PairInfo {
  std::size_t q = 0;  // index into Half::qs
  std::size_t r = 0;  // index into Half::rs
  PairKind kind = PairKind::Far;
  int gap = 0;
  Index child = 0;        // R_Q for Terminal and Transit pairs
  double dist = 0.0;      // dist(Q,R) over members
  double D = 0.0;
  // Far and Transit pairs: the part of R that Q interacts with at long
  // range (R itself, or R minus R_Q), seen through supp mu.
  double far_dist = kInf;
  double far_mass = 0.0;
  double threshold = 0.0;  // s(Q)^alpha s(R)^(1-alpha)
  bool admissible = false;
  double T = 0.0;          // s(Q)^(tau/2) s(R)^(tau/2) / D^(m+tau) sqrt(mu(Q) mu(R))
  double sup_k = 0.0;      // sup |k| over Q_mu x far part (Straddle: x R_mu)
};

/// Pair geometry of one half. Holds pointers to the kernel and lattices,
/// which must outlive it.
struct Half {
  bool symmetric = false;
  const KernelSpec* k = nullptr;
  const DyadicLattice* a = nullptr;  // lattice of Q
  const DyadicLattice* b = nullptr;  // lattice of R
  int scale_gap = 1;
  double alpha = 0.25;
  std::vector<CubeInfo> qs;
  std::vector<CubeInfo> rs;
  std::vector<PairInfo> pairs;

  /// Kernel of this half: T, or T^T for the symmetric half.
  double kh(Index x, Index y) const { return symmetric ? (*k)(y, x) : (*k)(x, y); }

  /// x lies in the generation-(gen+1) cube `child` of the R lattice.
  bool in_child(Index x, const PairInfo& p) const {
    return b->cube_of(x, rs[p.r].generation + 1) == p.child;
  }
};

inline Half build_half(const MetricMeasureSpace& space, const KernelSpec& k, const DyadicLattice& a,
                       const DyadicLattice& b, bool symmetric, int scale_gap, double alpha) {
  Half h;
  h.symmetric = symmetric;
  h.k = &k;
  h.a = &a;
  h.b = &b;
  h.scale_gap = scale_gap;
  h.alpha = alpha;
  for (Index id : good_components(a)) h.qs.push_back(cube_info(space, a, id));
  for (Index id : good_components(b)) h.rs.push_back(cube_info(space, b, id));
  const double m = k.m;
  const double tau = k.tau;
  const int min_gap = symmetric ? 1 : 0;

  std::vector<std::vector<PairInfo>> per_q(h.qs.size());
  parallel_for(h.qs.size(), [&](std::size_t qi) {
    const CubeInfo& q = h.qs[qi];
    const Cube& cq = a.cube(q.id);
    for (std::size_t ri = 0; ri < h.rs.size(); ++ri) {
      const CubeInfo& r = h.rs[ri];
      const int gap = q.generation - r.generation;
      if (gap < min_gap) continue;
      const Cube& cr = b.cube(r.id);
      PairInfo p;
      p.q = qi;
      p.r = ri;
      p.gap = gap;
      p.dist = set_distance(space, cq.members, cr.members);
      p.D = q.size + r.size + p.dist;
      if (gap < scale_gap) {
        p.kind = p.dist <= r.size ? PairKind::Diagonal : PairKind::Far;
      } else if (!intersects(cq.members, cr.members)) {
        p.kind = PairKind::Far;
      } else {
        const Index ch = b.cube_of(cq.members.front(), r.generation + 1);
        const Cube& cc = b.cube(ch);
        if (cc.parent == r.id && is_subset(cq.members, cc.members)) {
          p.child = ch;
          p.kind = cc.terminal ? PairKind::Terminal : PairKind::Transit;
        } else {
          p.kind = PairKind::Straddle;
        }
      }
      if (p.kind == PairKind::Far || p.kind == PairKind::Transit) {
        for (Index x : r.support) {
          if (p.kind == PairKind::Transit && h.in_child(x, p)) continue;
          p.far_mass += space.mu(x);
          for (Index y : q.support) {
            p.far_dist = std::min(p.far_dist, space.rho(x, y));
            p.sup_k = std::max(p.sup_k, std::abs(h.kh(x, y)));
          }
        }
        p.threshold = std::pow(q.size, alpha) * std::pow(r.size, 1.0 - alpha);
        p.admissible = p.far_mass == 0.0 || (p.far_dist >= p.threshold && q.rad <= k.delta_CZ * p.far_dist);
        p.T = std::pow(q.size * r.size, tau / 2.0) / std::pow(p.D, m + tau) * std::sqrt(q.mass * r.mass);
      } else if (p.kind == PairKind::Straddle) {
        for (Index x : r.support)
          for (Index y : q.support) p.sup_k = std::max(p.sup_k, std::abs(h.kh(x, y)));
      }
      per_q[qi].push_back(p);
    }
  }, 1);
  for (auto& v : per_q) h.pairs.insert(h.pairs.end(), v.begin(), v.end());
  return h;
}

/// Both halves for a lattice pair.
struct BilinearGeometry {
  Half first;   // Q in d1 with f, kernel T
  Half second;  // Q in d2 with g, kernel T^T, strictly finer than R
};

inline BilinearGeometry bilinear_geometry(const MetricMeasureSpace& space, const KernelSpec& k,
                                          const LatticePair& lp) {
  return {build_half(space, k, lp.d1, lp.d2, false, lp.gap, lp.alpha),
          build_half(space, k, lp.d2, lp.d1, true, lp.gap, lp.alpha)};
}

// ---------------------------------------------------------------------------
// Evaluation on a function pair

/// Per-pair values of one half. For Transit pairs t = a + c - b with
///   a = <K Delta_Q phi, 1_{R \ R_Q} Delta_R psi>
///   b = c_{R_Q} <K Delta_Q phi, 1_{X \ R_Q}>
///   c = c_{R_Q} <K Delta_Q phi, 1>
/// where c_{R_Q} is the constant value of Delta_R psi on R_Q. For Far pairs
/// a = t.
struct HalfEval {
  std::vector<double> t, a, b, c;
  std::vector<double> cval;     // c_{R_Q} per Transit pair
  std::vector<double> a_norm;   // ||Delta_Q phi|| per Q
  std::vector<double> b_norm;   // ||Delta_R psi|| per R
  std::vector<double> far_norm; // ||Delta_R psi on the far part|| per pair

  double sum(const Half& h, PairKind kind) const {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (h.pairs[i].kind == kind) s += t[i];
    return s;
  }
  double sum_of(const Half& h, const std::vector<double>& v) const {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (h.pairs[i].kind == PairKind::Transit) s += v[i];
    return s;
  }
};

namespace detail {

/// Component values of `dec` on the mu-support of a cube, zero when the cube
/// carries no component.
inline std::vector<double> support_values(const MartingaleDecomposition& dec, const CubeInfo& ci) {
  std::vector<double> v(ci.support.size(), 0.0);
  if (const Component* comp = dec.find(ci.id))
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = comp->values[ci.pos[i]];
  return v;
}

}  // namespace detail

/// phi_dec is decomposed on the Q lattice of the half, psi_dec on the R one.
inline HalfEval evaluate_half(const MetricMeasureSpace& space, const Half& h, const MartingaleDecomposition& phi_dec,
                              const MartingaleDecomposition& psi_dec) {
  const std::size_t n = space.size();
  PointSet supp;
  std::vector<std::size_t> where(n, std::size_t(-1));
  for (Index x = 0; x < n; ++x)
    if (space.mu(x) > 0.0) {
      where[x] = supp.size();
      supp.push_back(x);
    }

  HalfEval ev;
  std::vector<std::vector<double>> u(h.qs.size());
  std::vector<double> u_total(h.qs.size(), 0.0);
  ev.a_norm.assign(h.qs.size(), 0.0);
  parallel_for(h.qs.size(), [&](std::size_t qi) {
    const CubeInfo& q = h.qs[qi];
    const auto dq = detail::support_values(phi_dec, q);
    double nq = 0.0;
    for (std::size_t j = 0; j < dq.size(); ++j) nq += dq[j] * dq[j] * space.mu(q.support[j]);
    ev.a_norm[qi] = std::sqrt(nq);
    if (nq == 0.0) return;
    auto& uq = u[qi];
    uq.assign(supp.size(), 0.0);
    for (std::size_t i = 0; i < supp.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < q.support.size(); ++j) s += h.kh(supp[i], q.support[j]) * dq[j] * space.mu(q.support[j]);
      uq[i] = s;
      u_total[qi] += s * space.mu(supp[i]);
    }
  }, 1);

  std::vector<std::vector<double>> dr(h.rs.size());
  ev.b_norm.assign(h.rs.size(), 0.0);
  for (std::size_t ri = 0; ri < h.rs.size(); ++ri) {
    dr[ri] = detail::support_values(psi_dec, h.rs[ri]);
    double s = 0.0;
    for (std::size_t j = 0; j < dr[ri].size(); ++j) s += dr[ri][j] * dr[ri][j] * space.mu(h.rs[ri].support[j]);
    ev.b_norm[ri] = std::sqrt(s);
  }

  const std::size_t np = h.pairs.size();
  ev.t.assign(np, 0.0);
  ev.a.assign(np, 0.0);
  ev.b.assign(np, 0.0);
  ev.c.assign(np, 0.0);
  ev.cval.assign(np, 0.0);
  ev.far_norm.assign(np, 0.0);
  parallel_for(np, [&](std::size_t pi) {
    const PairInfo& p = h.pairs[pi];
    const CubeInfo& r = h.rs[p.r];
    const auto& d = dr[p.r];
    double far_sq = 0.0;
    for (std::size_t j = 0; j < r.support.size(); ++j) {
      const Index x = r.support[j];
      const bool far_part = p.kind == PairKind::Far || (p.kind == PairKind::Transit && !h.in_child(x, p));
      if (far_part) far_sq += d[j] * d[j] * space.mu(x);
    }
    ev.far_norm[pi] = std::sqrt(far_sq);
    if (p.kind == PairKind::Transit)
      for (std::size_t j = 0; j < r.support.size(); ++j)
        if (h.in_child(r.support[j], p)) {
          ev.cval[pi] = d[j];
          break;
        }
    const auto& uq = u[p.q];
    if (uq.empty() || ev.b_norm[p.r] == 0.0) return;
    double t = 0.0, a = 0.0;
    const double cval = ev.cval[pi];
    for (std::size_t j = 0; j < r.support.size(); ++j) {
      const Index x = r.support[j];
      const double v = uq[where[x]] * d[j] * space.mu(x);
      t += v;
      if (p.kind == PairKind::Transit && !h.in_child(x, p)) a += v;
    }
    ev.t[pi] = t;
    if (p.kind == PairKind::Far) ev.a[pi] = t;
    if (p.kind == PairKind::Transit) {
      double outside = 0.0;
      for (std::size_t i = 0; i < supp.size(); ++i)
        if (!h.in_child(supp[i], p)) outside += uq[i] * space.mu(supp[i]);
      ev.a[pi] = a;
      ev.b[pi] = cval * outside;
      ev.c[pi] = cval * u_total[p.q];
    }
  }, 16);
  return ev;
}

struct PairTerm {
  Index q = 0;
  Index r = 0;
  PairKind kind = PairKind::Far;
  bool symmetric = false;
  double value = 0.0;
};

/// Exact regrouping of <T f_good, g_good>. The symmetric half carries the
/// pairs with the g-cube strictly finer than the f-cube.
struct SigmaSplit {
  double lambda_part = 0.0;
  double sigma1 = 0.0, sigma2 = 0.0, sigma3_term = 0.0, sigma3_tran = 0.0, sigma3_straddle = 0.0;
  double sym_sigma1 = 0.0, sym_sigma2 = 0.0, sym_sigma3_term = 0.0, sym_sigma3_tran = 0.0,
         sym_sigma3_straddle = 0.0;
  // transit parts, t = far + paraproduct - extension
  double tran_far = 0.0, tran_ext = 0.0, tran_para = 0.0;
  double sym_tran_far = 0.0, sym_tran_ext = 0.0, sym_tran_para = 0.0;
  double direct = 0.0;   // <T f_good, g_good> computed densely
  double scale = 0.0;    // sum of absolute values of all terms
  double abs_form = 0.0; // <|K| |f_good|, |g_good|>, the size roundoff is measured against
  std::vector<PairTerm> terms;  // kept when verbose

  double total() const {
    return lambda_part + sigma1 + sigma2 + sigma3_term + sigma3_tran + sigma3_straddle + sym_sigma1 + sym_sigma2 +
           sym_sigma3_term + sym_sigma3_tran + sym_sigma3_straddle;
  }
  double relative_error() const {
    const double den = std::max({std::abs(direct), scale, abs_form, 1e-300});
    return std::abs(total() - direct) / den;
  }
};

struct SplitValues {
  SigmaSplit split;
  HalfEval first;
  HalfEval second;
};

/// dec_f on lp.d1, dec_g on lp.d2.
inline SplitValues split_bilinear_full(const KernelSpec& k, const MetricMeasureSpace& space, const LatticePair& lp,
                                       const BilinearGeometry& geo, const MartingaleDecomposition& dec_f,
                                       const MartingaleDecomposition& dec_g, bool verbose = false) {
  SplitValues out;
  SigmaSplit& s = out.split;
  out.first = evaluate_half(space, geo.first, dec_f, dec_g);
  out.second = evaluate_half(space, geo.second, dec_g, dec_f);

  auto fill = [&](const Half& h, const HalfEval& ev, double& s1, double& s2, double& s3t, double& s3r, double& s3s,
                  double& tf, double& te, double& tp) {
    s1 = ev.sum(h, PairKind::Diagonal);
    s2 = ev.sum(h, PairKind::Far);
    s3t = ev.sum(h, PairKind::Terminal);
    s3r = ev.sum(h, PairKind::Transit);
    s3s = ev.sum(h, PairKind::Straddle);
    tf = ev.sum_of(h, ev.a);
    te = ev.sum_of(h, ev.b);
    tp = ev.sum_of(h, ev.c);
    for (std::size_t i = 0; i < ev.t.size(); ++i) {
      s.scale += std::abs(ev.t[i]);
      if (verbose && ev.t[i] != 0.0) {
        const auto& p = h.pairs[i];
        // report the f-cube first in both halves
        const Index qid = h.qs[p.q].id, rid = h.rs[p.r].id;
        s.terms.push_back({h.symmetric ? rid : qid, h.symmetric ? qid : rid, p.kind, h.symmetric, ev.t[i]});
      }
    }
  };
  fill(geo.first, out.first, s.sigma1, s.sigma2, s.sigma3_term, s.sigma3_tran, s.sigma3_straddle, s.tran_far,
       s.tran_ext, s.tran_para);
  fill(geo.second, out.second, s.sym_sigma1, s.sym_sigma2, s.sym_sigma3_term, s.sym_sigma3_tran,
       s.sym_sigma3_straddle, s.sym_tran_far, s.sym_tran_ext, s.sym_tran_para);

  auto [f_good, f_bad] = split_good_bad(space, lp.d1, dec_f);
  auto [g_good, g_bad] = split_good_bad(space, lp.d2, dec_g);
  const FunctionVector ones(space.size(), 1.0);
  FunctionVector f_tilde = f_good;
  for (double& v : f_tilde) v -= dec_f.lambda_part;
  const auto t1 = apply(k, space, ones);
  const auto ts1 = adjoint_apply(k, space, ones);
  const double l1 = dec_f.lambda_part * inner(space, t1, g_good);
  const double l2 = dec_g.lambda_part * inner(space, f_tilde, ts1);
  s.lambda_part = l1 + l2;
  s.scale += std::abs(l1) + std::abs(l2);
  s.direct = inner(space, apply(k, space, f_good), g_good);
  for (Index x = 0; x < space.size(); ++x) {
    if (space.mu(x) <= 0.0 || g_good[x] == 0.0) continue;
    double acc = 0.0;
    for (Index y = 0; y < space.size(); ++y) acc += std::abs(k(x, y) * f_good[y]) * space.mu(y);
    s.abs_form += acc * std::abs(g_good[x]) * space.mu(x);
  }
  return out;
}

inline SigmaSplit split_bilinear(const KernelSpec& k, const MetricMeasureSpace& space, const LatticePair& lp,
                                 const MartingaleDecomposition& dec_f, const MartingaleDecomposition& dec_g,
                                 bool verbose = false) {
  const auto geo = bilinear_geometry(space, k, lp);
  return split_bilinear_full(k, space, lp, geo, dec_f, dec_g, verbose).split;
}

}  // namespace czkit
