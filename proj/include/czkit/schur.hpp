#pragma once

// Interaction matrices between cubes of two lattices and the Schur-type
// bounds that control them.
//
// Long-range entries are
//   T_{Q,R} = s(Q)^{tau/2} s(R)^{tau/2} / D(Q,R)^{m+tau} sqrt(mu(Q) mu(R)),
// inside-child entries are
//   T_{Q,R} = (s(Q)/s(R))^{tau/2} sqrt(mu(Q) / mu(R_1)),   Q inside R_1.

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "czkit/bilinear.hpp"

namespace czkit {

enum class Regime { LongRange, InsideChild };

/// Row or column cube of an interaction matrix. For inside-child columns the
/// cube is the child R_1; generation and size are those of its parent R,
/// and mass is mu(R_1).
struct MatrixCube {
  Index id = 0;
  Index parent = 0;  // R for inside-child columns
  int generation = 0;
  double size = 0.0;
  double mass = 0.0;
  PointSet support;
  bool transit = true;
};

struct InteractionEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  double D = 0.0;  // D(Q,R) for long-range entries
};

struct InteractionMatrix {
  Regime regime = Regime::LongRange;
  double kappa = 0.5;
  double m = 1.0;
  double tau = 1.0;
  std::vector<MatrixCube> rows;
  std::vector<MatrixCube> cols;
  std::vector<InteractionEntry> entries;

  Matrix dense() const {
    Matrix M(rows.size(), cols.size());
    for (const auto& e : entries) M(e.row, e.col) += e.value;
    return M;
  }

  double bilinear(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (const auto& e : entries) s += e.value * a[e.row] * b[e.col];
    return s;
  }
};

inline MatrixCube matrix_cube(const MetricMeasureSpace& space, const DyadicLattice& lat, Index id) {
  const CubeInfo ci = cube_info(space, lat, id);
  const Cube& c = lat.cube(id);
  return {id, id, ci.generation, ci.size, ci.mass, ci.support, c.transit()};
}

inline double long_range_entry(double sq, double sr, double D, double mq, double mr, double m, double tau) {
  return std::pow(sq * sr, tau / 2.0) / std::pow(D, m + tau) * std::sqrt(mq * mr);
}

/// Long-range matrix over explicit (Q in lat_q, R in lat_r) pairs.
inline InteractionMatrix make_long_range_matrix(const MetricMeasureSpace& space, const DyadicLattice& lat_q,
                                                const DyadicLattice& lat_r,
                                                const std::vector<std::pair<Index, Index>>& pairs, double m,
                                                double tau) {
  InteractionMatrix M;
  M.regime = Regime::LongRange;
  M.kappa = lat_q.kappa();
  M.m = m;
  M.tau = tau;
  std::map<Index, std::size_t> ri, ci;
  for (const auto& [q, r] : pairs) {
    auto [itq, newq] = ri.emplace(q, M.rows.size());
    if (newq) M.rows.push_back(matrix_cube(space, lat_q, q));
    auto [itr, newr] = ci.emplace(r, M.cols.size());
    if (newr) M.cols.push_back(matrix_cube(space, lat_r, r));
    const double D = dqr_distance(space, lat_q.cube(q), lat_r.cube(r));
    const auto& rq = M.rows[itq->second];
    const auto& cr = M.cols[itr->second];
    M.entries.push_back({itq->second, itr->second, long_range_entry(rq.size, cr.size, D, rq.mass, cr.mass, m, tau), D});
  }
  return M;
}

/// Long-range matrix over the pairs of a half selected by `keep`.
template <class Pred>
InteractionMatrix half_long_range_matrix(const Half& h, Pred keep) {
  InteractionMatrix M;
  M.regime = Regime::LongRange;
  M.kappa = h.a->kappa();
  M.m = h.k->m;
  M.tau = h.k->tau;
  std::map<std::size_t, std::size_t> ri, ci;
  auto as_cube = [](const CubeInfo& c) { return MatrixCube{c.id, c.id, c.generation, c.size, c.mass, c.support, true}; };
  for (const auto& p : h.pairs) {
    if (!keep(p)) continue;
    auto [itq, newq] = ri.emplace(p.q, M.rows.size());
    if (newq) M.rows.push_back(as_cube(h.qs[p.q]));
    auto [itr, newr] = ci.emplace(p.r, M.cols.size());
    if (newr) M.cols.push_back(as_cube(h.rs[p.r]));
    M.entries.push_back({itq->second, itr->second, p.T, p.D});
  }
  return M;
}

// ---------------------------------------------------------------------------
// Schur tests

struct SchurSums {
  double max_row = 0.0;
  double max_col = 0.0;
};

/// Largest mu-weighted row and column sums of a nonnegative kernel between
/// two point sets: max_x sum_y k(x,y) mu(y) and max_y sum_x k(x,y) mu(x).
template <class Kernel>
SchurSums schur_row_sums(const MetricMeasureSpace& space, Kernel&& k, const PointSet& rows, const PointSet& cols) {
  SchurSums s;
  std::vector<double> col_acc(cols.size(), 0.0);
  for (Index x : rows) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = k(x, cols[j]);
      acc += v * space.mu(cols[j]);
      col_acc[j] += v * space.mu(x);
    }
    s.max_row = std::max(s.max_row, acc);
  }
  for (double v : col_acc) s.max_col = std::max(s.max_col, v);
  return s;
}

/// k_j(x,y) = kappa^{j tau} / (kappa^j + rho(x,y))^{m+tau}, with kappa^j = s.
struct SchurKernel {
  const MetricMeasureSpace* space;
  double s, m, tau;
  double operator()(Index x, Index y) const {
    return std::pow(s, tau) / std::pow(s + space->rho(x, y), m + tau);
  }
};

struct SchurSlice {
  int j = 0;  // generation of the R cubes
  int k = 0;  // Q is k generations finer
  SchurSums sums;
};

struct SchurConstant {
  double C = 0.0;
  double c_geo = 0.0;  // max (s(R) + rho(x,y)) / D(Q,R) over entries, x in Q, y in R
  std::vector<SchurSlice> slices;
};

/// Constant C with sum T_{Q,R} a_Q b_R <= C ||a|| ||b|| for a long-range
/// matrix: slice by generation offset k, dominate each entry by
/// c_geo^{m+tau} kappa^{k tau/2} k_j integrated against the mu-support of Q
/// and R, and run the Schur test for k_j on each slice.
inline SchurConstant long_range_schur_constant(const MetricMeasureSpace& space, const InteractionMatrix& M) {
  SchurConstant sc;
  if (M.regime != Regime::LongRange) throw Error(ErrorCode::InvalidInput, "not a long-range matrix");
  std::map<std::pair<int, int>, std::pair<std::set<std::size_t>, std::set<std::size_t>>> groups;
  for (const auto& e : M.entries) {
    const auto& q = M.rows[e.row];
    const auto& r = M.cols[e.col];
    if (!q.transit || !r.transit) throw Error(ErrorCode::NonTransitEntry, "interaction entry on a terminal cube");
    const int k = q.generation - r.generation;
    if (k < 0) throw Error(ErrorCode::InvalidInput, "long-range rows must be at least as fine as columns");
    double far = 0.0;
    for (Index x : q.support)
      for (Index y : r.support) far = std::max(far, space.rho(x, y));
    if (e.D > 0.0) sc.c_geo = std::max(sc.c_geo, (r.size + far) / e.D);
    auto& g = groups[{r.generation, k}];
    g.first.insert(e.row);
    g.second.insert(e.col);
  }
  std::map<int, double> best;  // per k: max over j of sqrt(row * col)
  for (const auto& [key, g] : groups) {
    PointSet rows, cols;
    double s = 0.0;
    for (std::size_t i : g.first) rows.insert(rows.end(), M.rows[i].support.begin(), M.rows[i].support.end());
    for (std::size_t i : g.second) {
      cols.insert(cols.end(), M.cols[i].support.begin(), M.cols[i].support.end());
      s = M.cols[i].size;
    }
    SchurSlice sl;
    sl.j = key.first;
    sl.k = key.second;
    sl.sums = schur_row_sums(space, SchurKernel{&space, s, M.m, M.tau}, rows, cols);
    sc.slices.push_back(sl);
    double& b = best[sl.k];
    b = std::max(b, std::sqrt(sl.sums.max_row * sl.sums.max_col));
  }
  double sum = 0.0;
  for (const auto& [k, b] : best) sum += std::pow(M.kappa, k * M.tau / 2.0) * b;
  sc.C = std::pow(sc.c_geo, M.m + M.tau) * sum;
  return sc;
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  bool pass = true;
};

inline double l2(std::span<const double> v) { return norm2(v); }

inline BoundCheck schur_bound_long_range(const MetricMeasureSpace& space, const InteractionMatrix& M,
                                         std::span<const double> a, std::span<const double> b) {
  for (double v : a)
    if (v < 0.0) throw Error(ErrorCode::InvalidInput, "Schur weights must be nonnegative");
  for (double v : b)
    if (v < 0.0) throw Error(ErrorCode::InvalidInput, "Schur weights must be nonnegative");
  BoundCheck r;
  r.constant = long_range_schur_constant(space, M).C;
  r.lhs = M.bilinear(a, b);
  r.rhs = r.constant * l2(a) * l2(b);
  r.pass = r.lhs <= r.rhs * (1.0 + 1e-12);
  return r;
}

/// sqrt(max row sum * max column sum) of a nonnegative entry list.
inline double unit_schur_constant(const std::vector<InteractionEntry>& entries, std::size_t rows, std::size_t cols) {
  std::vector<double> rs(rows, 0.0), cs(cols, 0.0);
  for (const auto& e : entries) {
    rs[e.row] += e.value;
    cs[e.col] += e.value;
  }
  double mr = 0.0, mc = 0.0;
  for (double v : rs) mr = std::max(mr, v);
  for (double v : cs) mc = std::max(mc, v);
  return std::sqrt(mr * mc);
}

// ---------------------------------------------------------------------------
// Block matrix inside a child

/// Inside-child matrix from the Transit pairs of a half. Columns are the
/// distinct (R, R_Q) pairs.
inline InteractionMatrix half_block_matrix(const MetricMeasureSpace& space, const Half& h) {
  InteractionMatrix M;
  M.regime = Regime::InsideChild;
  M.kappa = h.a->kappa();
  M.m = h.k->m;
  M.tau = h.k->tau;
  std::map<std::size_t, std::size_t> ri;
  std::map<std::pair<std::size_t, Index>, std::size_t> ci;
  for (const auto& p : h.pairs) {
    if (p.kind != PairKind::Transit) continue;
    const CubeInfo& q = h.qs[p.q];
    const CubeInfo& r = h.rs[p.r];
    auto [itq, newq] = ri.emplace(p.q, M.rows.size());
    if (newq) M.rows.push_back({q.id, q.id, q.generation, q.size, q.mass, q.support, true});
    auto [itc, newc] = ci.emplace(std::make_pair(p.r, p.child), M.cols.size());
    if (newc) {
      const CubeInfo child = cube_info(space, *h.b, p.child);
      M.cols.push_back({p.child, r.id, r.generation, r.size, child.mass, child.support, h.b->cube(p.child).transit()});
    }
    const auto& col = M.cols[itc->second];
    M.entries.push_back(
        {itq->second, itc->second, std::pow(q.size / r.size, M.tau / 2.0) * std::sqrt(q.mass / col.mass), 0.0});
  }
  return M;
}

/// sum T_{Q,R} a_Q b_R <= ||a|| ||b|| / (1 - kappa^{tau/2}) when every Q
/// meets at most one column per generation of R.
inline BoundCheck block_matrix_bound(const InteractionMatrix& M, std::span<const double> a, std::span<const double> b) {
  if (M.regime != Regime::InsideChild) throw Error(ErrorCode::InvalidInput, "not an inside-child matrix");
  std::map<std::pair<std::size_t, int>, std::size_t> owner;
  for (const auto& e : M.entries) {
    const auto key = std::make_pair(e.row, M.cols[e.col].generation);
    auto [it, fresh] = owner.emplace(key, e.col);
    if (!fresh && it->second != e.col)
      throw Error(ErrorCode::MultipleParents, "cube assigned to two children at the same generation");
    if (!M.cols[e.col].transit) throw Error(ErrorCode::NonTransitEntry, "inside-child column on a terminal child");
  }
  BoundCheck r;
  r.constant = 1.0 / (1.0 - std::pow(M.kappa, M.tau / 2.0));
  r.lhs = M.bilinear(a, b);
  r.rhs = r.constant * l2(a) * l2(b);
  r.pass = r.lhs <= r.rhs * (1.0 + 1e-12);
  return r;
}

// ---------------------------------------------------------------------------
// Dense spectral norm

/// Largest singular value by power iteration on M^T M.
inline double dense_spectral_norm(const Matrix& M, double tol = 1e-12, std::size_t max_iter = 20000) {
  if (M.rows == 0 || M.cols == 0) return 0.0;
  std::vector<double> v(M.cols, 1.0), w(M.rows), u(M.cols);
  std::mt19937_64 rng(7);
  for (auto& e : v) e = 0.5 + uniform01(rng);
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    for (auto& e : v) e /= nv;
    for (std::size_t i = 0; i < M.rows; ++i) w[i] = dot(M.row(i), v);
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < M.rows; ++i)
      for (std::size_t j = 0; j < M.cols; ++j) u[j] += M(i, j) * w[i];
    const double next = dot(u, v);
    v = u;
    if (std::abs(next - lambda) <= tol * std::max(next, 1e-300)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

// ---------------------------------------------------------------------------
// Far interaction

struct FarBound {
  double measured = 0.0;
  double bound = 0.0;
  double distance = kInf;   // dist(Q_mu, supp psi)
  double threshold = 0.0;   // s(Q)^alpha s(R)^(1-alpha)
  bool regime_ok = true;    // rad_Q <= delta_CZ * distance
  bool pass = true;
};

/// measured = |<T phi, psi>| with phi on Q in the second kernel variable;
/// pass the transposed kernel for <phi, T psi>. The bound is
/// C_CZ 3^{m+tau} (rad_Q / s(Q))^tau T_{Q,R} ||phi|| ||psi||.
inline FarBound far_interaction_bound(const MetricMeasureSpace& space, const KernelSpec& k, const DyadicLattice& lat_q,
                                      Index q, const DyadicLattice& lat_r, Index r, std::span<const double> phi,
                                      std::span<const double> psi, double alpha) {
  const Cube& cq = lat_q.cube(q);
  const Cube& cr = lat_r.cube(r);
  if (cq.generation < cr.generation) throw Error(ErrorCode::HypothesisViolated, "Q must be at least as fine as R");
  const CubeInfo qi = cube_info(space, lat_q, q);
  double mean = 0.0, l1 = 0.0;
  for (Index x = 0; x < space.size(); ++x) {
    if (space.mu(x) <= 0.0) continue;
    const bool in_q = std::binary_search(cq.members.begin(), cq.members.end(), x);
    const bool in_r = std::binary_search(cr.members.begin(), cr.members.end(), x);
    if (phi[x] != 0.0 && !in_q) throw Error(ErrorCode::HypothesisViolated, "phi is not supported in Q");
    if (psi[x] != 0.0 && !in_r) throw Error(ErrorCode::HypothesisViolated, "psi is not supported in R");
    mean += phi[x] * space.mu(x);
    l1 += std::abs(phi[x]) * space.mu(x);
  }
  if (std::abs(mean) > 1e-12 * std::max(l1, 1e-300) && l1 > 0.0)
    throw Error(ErrorCode::HypothesisViolated, "phi does not have zero mean");

  FarBound fb;
  PointSet supp_psi;
  for (Index x : cr.members)
    if (space.mu(x) > 0.0 && psi[x] != 0.0) supp_psi.push_back(x);
  fb.threshold = std::pow(cq.size, alpha) * std::pow(cr.size, 1.0 - alpha);
  if (supp_psi.empty() || l1 == 0.0) return fb;
  fb.distance = set_distance(space, qi.support, supp_psi);
  if (fb.distance < fb.threshold)
    throw Error(ErrorCode::HypothesisViolated, "dist(Q, supp psi) is below s(Q)^alpha s(R)^(1-alpha)");
  fb.regime_ok = qi.rad <= k.delta_CZ * fb.distance;

  double s = 0.0;
  for (Index x : supp_psi) {
    double acc = 0.0;
    for (Index y : qi.support) acc += k(x, y) * phi[y] * space.mu(y);
    s += acc * psi[x] * space.mu(x);
  }
  fb.measured = std::abs(s);
  const double D = dqr_distance(space, cq, cr);
  const double T = long_range_entry(cq.size, cr.size, D, qi.mass, space.mu_of(cr.members), k.m, k.tau);
  const double factor = k.C_CZ * std::pow(3.0, k.m + k.tau) * std::pow(qi.rad / cq.size, k.tau);
  fb.bound = factor * T * l2_norm(space, phi) * l2_norm(space, psi);
  fb.pass = fb.measured <= fb.bound * (1.0 + 1e-12) + 1e-300;
  return fb;
}

}  // namespace czkit
