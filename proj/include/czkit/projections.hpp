#pragma once

// Averaging projection Lambda and martingale differences Delta_Q.
//
// For a transit cube Q with children Q_j:
//   Delta_Q phi = <phi>_{Q_j} - <phi>_Q   on transit children,
//   Delta_Q phi = phi - <phi>_Q           on terminal children,
// and zero off Q. Components are stored on the support of their cube only.

#include <map>
#include <vector>

#include "czkit/lattice.hpp"

namespace czkit {

inline double mean_over(const MetricMeasureSpace& space, std::span<const double> phi, const PointSet& s) {
  double mass = 0.0;
  double acc = 0.0;
  for (Index x : s) {
    mass += space.mu(x);
    acc += phi[x] * space.mu(x);
  }
  if (!(mass > 0.0)) throw Error(ErrorCode::ZeroMass, "average over a set of zero mu-mass");
  return acc / mass;
}

/// <phi>_Q, the mu-average over Q.
inline double average(const MetricMeasureSpace& space, const DyadicLattice& lat, std::span<const double> phi,
                      Index q) {
  return mean_over(space, phi, lat.cube(q).members);
}

/// Delta_Q phi restricted to the members of Q (aligned with members).
inline std::vector<double> delta_local(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                       std::span<const double> phi, Index q) {
  const Cube& c = lat.cube(q);
  if (!c.classified) throw Error(ErrorCode::ClassificationMissing, "cube is not classified terminal/transit");
  const double avg_q = mean_over(space, phi, c.members);
  std::vector<double> out(c.members.size(), 0.0);
  // position lookup inside the parent member list
  for (Index ch : c.children) {
    const Cube& child = lat.cube(ch);
    if (child.transit()) {
      const double v = mean_over(space, phi, child.members) - avg_q;
      for (Index x : child.members) {
        auto it = std::lower_bound(c.members.begin(), c.members.end(), x);
        out[static_cast<std::size_t>(it - c.members.begin())] = v;
      }
    } else {
      for (Index x : child.members) {
        auto it = std::lower_bound(c.members.begin(), c.members.end(), x);
        out[static_cast<std::size_t>(it - c.members.begin())] = phi[x] - avg_q;
      }
    }
  }
  return out;
}

/// Delta_Q phi as a full vector, zero off Q.
inline FunctionVector delta_proj(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                 std::span<const double> phi, Index q) {
  const Cube& c = lat.cube(q);
  if (!c.transit()) throw Error(ErrorCode::InvalidInput, "Delta_Q is defined for transit cubes only");
  FunctionVector out(space.size(), 0.0);
  const auto local = delta_local(space, lat, phi, q);
  for (std::size_t i = 0; i < c.members.size(); ++i) out[c.members[i]] = local[i];
  return out;
}

struct Component {
  Index cube = 0;
  std::vector<double> values;  // aligned with lattice.cube(cube).members
  double norm = 0.0;           // L2(mu) norm
};

struct MartingaleDecomposition {
  double lambda_part = 0.0;
  std::vector<Component> components;
  std::map<Index, std::size_t> by_cube;

  const Component* find(Index cube) const {
    auto it = by_cube.find(cube);
    return it == by_cube.end() ? nullptr : &components[it->second];
  }
};

inline MartingaleDecomposition decompose(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                         std::span<const double> phi) {
  if (!lat.classified()) throw Error(ErrorCode::ClassificationMissing, "lattice is not classified");
  if (!lat.cube(lat.root()).transit()) throw Error(ErrorCode::RootTerminal, "root cube is terminal");
  MartingaleDecomposition dec;
  dec.lambda_part = mean_over(space, phi, lat.cube(lat.root()).members);
  for (const auto& c : lat.cubes()) {
    if (!c.transit() || c.leaf()) continue;
    Component comp;
    comp.cube = c.id;
    comp.values = delta_local(space, lat, phi, c.id);
    double s = 0.0;
    for (std::size_t i = 0; i < c.members.size(); ++i) s += comp.values[i] * comp.values[i] * space.mu(c.members[i]);
    comp.norm = std::sqrt(s);
    dec.by_cube[c.id] = dec.components.size();
    dec.components.push_back(std::move(comp));
  }
  return dec;
}

inline void add_component(const DyadicLattice& lat, const Component& comp, FunctionVector& out, double scale = 1.0) {
  const auto& mem = lat.cube(comp.cube).members;
  for (std::size_t i = 0; i < mem.size(); ++i) out[mem[i]] += scale * comp.values[i];
}

inline FunctionVector reconstruct(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                  const MartingaleDecomposition& dec) {
  FunctionVector out(space.size(), dec.lambda_part);
  for (const auto& comp : dec.components) add_component(lat, comp, out);
  return out;
}

struct ProjectionReport {
  double reconstruction_error = 0.0;  // max |recon - phi| on supp mu, relative to ||phi||_inf
  double pythagoras_error = 0.0;      // relative to ||phi||^2
  double idempotence_error = 0.0;     // max ||Delta_Q Delta_Q phi - Delta_Q phi|| / ||phi||
  double orthogonality_error = 0.0;   // max |<Delta_Q phi, Delta_Q' phi>| / ||phi||^2
  double lambda_orthogonality_error = 0.0;
  double zero_mean_error = 0.0;
  std::size_t pairs_checked = 0;

  bool ok(double tol = 1e-10) const {
    return reconstruction_error <= tol && pythagoras_error <= tol && idempotence_error <= tol &&
           orthogonality_error <= tol && lambda_orthogonality_error <= tol && zero_mean_error <= tol;
  }
};

/// Verifies reconstruction, the Pythagorean identity, idempotence, mutual
/// orthogonality of components and orthogonality to the Lambda part.
inline ProjectionReport properties_check(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                         const MartingaleDecomposition& dec, std::span<const double> phi) {
  ProjectionReport rep;
  double sup = 0.0;
  for (double v : phi) sup = std::max(sup, std::abs(v));
  const double nphi = l2_norm(space, phi);
  const double scale_inf = sup > 0.0 ? sup : 1.0;
  const double scale2 = nphi > 0.0 ? nphi * nphi : 1.0;
  const double scale1 = nphi > 0.0 ? nphi : 1.0;

  const FunctionVector recon = reconstruct(space, lat, dec);
  for (Index x = 0; x < space.size(); ++x)
    if (space.mu(x) > 0.0)
      rep.reconstruction_error = std::max(rep.reconstruction_error, std::abs(recon[x] - phi[x]) / scale_inf);

  double sum_sq = dec.lambda_part * dec.lambda_part;  // mu is a probability
  for (const auto& comp : dec.components) sum_sq += comp.norm * comp.norm;
  rep.pythagoras_error = std::abs(nphi * nphi - sum_sq) / scale2;

  // full vectors are built per component; pairs are checked only along
  // ancestor chains since disjoint supports give exact zeros.
  std::vector<FunctionVector> full;
  full.reserve(dec.components.size());
  for (const auto& comp : dec.components) {
    FunctionVector v(space.size(), 0.0);
    add_component(lat, comp, v);
    full.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < dec.components.size(); ++i) {
    const Index q = dec.components[i].cube;
    const FunctionVector twice = delta_proj(space, lat, full[i], q);
    double err = 0.0;
    for (Index x = 0; x < space.size(); ++x) err += (twice[x] - full[i][x]) * (twice[x] - full[i][x]) * space.mu(x);
    rep.idempotence_error = std::max(rep.idempotence_error, std::sqrt(err) / scale1);

    double mean = 0.0;
    for (Index x : lat.cube(q).members) mean += full[i][x] * space.mu(x);
    rep.zero_mean_error = std::max(rep.zero_mean_error, std::abs(mean) / scale1);
    rep.lambda_orthogonality_error =
        std::max(rep.lambda_orthogonality_error, std::abs(mean * dec.lambda_part) / scale2);

    auto parent = lat.cube(q).parent;
    while (parent) {
      if (const Component* pc = dec.find(*parent)) {
        const std::size_t j = dec.by_cube.at(*parent);
        double ip = 0.0;
        for (Index x : lat.cube(q).members) ip += full[i][x] * full[j][x] * space.mu(x);
        rep.orthogonality_error = std::max(rep.orthogonality_error, std::abs(ip) / scale2);
        ++rep.pairs_checked;
        (void)pc;
      }
      parent = lat.cube(*parent).parent;
    }
  }
  // Delta_Q of a constant vanishes (Delta_Q Lambda = 0)
  const FunctionVector constant(space.size(), dec.lambda_part);
  for (const auto& comp : dec.components) {
    const auto local = delta_local(space, lat, constant, comp.cube);
    for (double v : local)
      rep.lambda_orthogonality_error = std::max(rep.lambda_orthogonality_error, std::abs(v) / scale_inf);
  }
  return rep;
}

/// Splits phi into the Lambda part plus good-cube components, and the rest.
/// `goodness` is read from the lattice flags.
inline std::pair<FunctionVector, FunctionVector> split_good_bad(const MetricMeasureSpace& space,
                                                                const DyadicLattice& lat,
                                                                const MartingaleDecomposition& dec) {
  FunctionVector good(space.size(), dec.lambda_part);
  FunctionVector bad(space.size(), 0.0);
  for (const auto& comp : dec.components) {
    const GoodBad g = lat.cube(comp.cube).goodness;
    if (g == GoodBad::Unclassified) throw Error(ErrorCode::ClassificationMissing, "good/bad not classified");
    add_component(lat, comp, g == GoodBad::Good ? good : bad);
  }
  return {good, bad};
}

/// ||f_bad|| straight from the component norms (the bad components are orthogonal).
inline double bad_norm(const DyadicLattice& lat, const MartingaleDecomposition& dec,
                       const std::vector<char>& bad_flags) {
  double s = 0.0;
  for (const auto& comp : dec.components)
    if (bad_flags[comp.cube]) s += comp.norm * comp.norm;
  (void)lat;
  return std::sqrt(s);
}

}  // namespace czkit
