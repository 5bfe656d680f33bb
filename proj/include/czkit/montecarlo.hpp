#pragma once

// Monte Carlo over random second lattices: probability that a cube is bad,
// expected norm of the bad part of a function, and calibration of the
// scale-gap parameter S.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "czkit/lattice.hpp"
#include "czkit/parallel.hpp"
#include "czkit/projections.hpp"

namespace czkit {

struct BadnessParams {
  double kappa = 0.5;
  double alpha = 0.25;
  double delta_bad = 0.25;
  int S = 1;

  int gap() const { return scale_gap(kappa, delta_bad, S); }
};

/// Skeleton generations of `count` random lattices with seeds
/// mix_seed(master_seed, i). Only these are needed to classify cubes.
inline std::vector<std::vector<int>> sample_skeletons(const MetricMeasureSpace& space, double kappa,
                                                      std::size_t count, std::uint64_t master_seed) {
  std::vector<std::vector<int>> out(count);
  parallel_for(count, [&](std::size_t i) {
    const auto lat = build_lattice(space, kappa, mix_seed(master_seed, i));
    out[i] = skeleton_generation(lat, space.size());
  }, 1);
  return out;
}

struct BadProbability {
  Index cube = 0;
  double p_hat = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
  bool low_confidence = false;

  bool within(double bound) const { return p_hat <= bound + 3.0 * stderr_; }
};

inline constexpr std::size_t kMinEnsemble = 100;

/// Per-cube bad frequency against a sampled ensemble.
inline std::vector<BadProbability> estimate_bad_probability(const MetricMeasureSpace& space,
                                                            const DyadicLattice& lat,
                                                            const std::vector<Index>& probes,
                                                            const std::vector<std::vector<int>>& ensemble,
                                                            const BadnessParams& p) {
  const int gap = p.gap();
  std::vector<std::vector<double>> profiles(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) {
    profiles[i] = distance_profile(space, lat.cube(probes[i]).members);
  }, 4);
  std::vector<BadProbability> out(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) {
    const Cube& c = lat.cube(probes[i]);
    std::size_t hits = 0;
    for (const auto& sg : ensemble)
      hits += is_bad(profiles[i], c.generation, c.size, lat.kappa(), sg, p.alpha, gap) ? 1 : 0;
    const double n = static_cast<double>(ensemble.size());
    BadProbability& b = out[i];
    b.cube = probes[i];
    b.samples = ensemble.size();
    b.p_hat = n > 0 ? hits / n : 0.0;
    b.stderr_ = n > 0 ? std::sqrt(b.p_hat * (1.0 - b.p_hat) / n) : 0.0;
    b.low_confidence = ensemble.size() < kMinEnsemble;
  }, 1);
  return out;
}

inline std::vector<BadProbability> estimate_bad_probability(const MetricMeasureSpace& space,
                                                            const DyadicLattice& lat,
                                                            const std::vector<Index>& probes,
                                                            std::size_t ensemble_size, const BadnessParams& p,
                                                            std::uint64_t master_seed) {
  return estimate_bad_probability(space, lat, probes, sample_skeletons(space, p.kappa, ensemble_size, master_seed),
                                  p);
}

/// Transit cubes with children: the cubes that carry martingale components.
inline std::vector<Index> component_cubes(const DyadicLattice& lat) {
  std::vector<Index> out;
  for (const auto& c : lat.cubes())
    if (c.transit() && !c.leaf()) out.push_back(c.id);
  return out;
}

/// At most `max_count` component cubes, spread evenly over the id range.
inline std::vector<Index> probe_cubes(const DyadicLattice& lat, std::size_t max_count) {
  auto all = component_cubes(lat);
  if (all.size() <= max_count) return all;
  std::vector<Index> out;
  for (std::size_t i = 0; i < max_count; ++i) out.push_back(all[i * all.size() / max_count]);
  return out;
}

struct BadNormEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  double f_norm = 0.0;
  double bound = 0.0;  // delta_bad * ||f||
  std::size_t samples = 0;
  bool low_confidence = false;
  bool check = false;
};

/// Mean of ||f_bad|| over the ensemble, with f decomposed on `lat`.
inline BadNormEstimate expected_bad_norm(const MetricMeasureSpace& space, const DyadicLattice& lat,
                                         const FunctionVector& f,
                                         const std::vector<std::vector<int>>& ensemble, const BadnessParams& p) {
  const auto dec = decompose(space, lat, f);
  const int gap = p.gap();
  std::vector<std::vector<double>> profiles(dec.components.size());
  parallel_for(dec.components.size(), [&](std::size_t i) {
    profiles[i] = distance_profile(space, lat.cube(dec.components[i].cube).members);
  }, 4);
  std::vector<double> norms(ensemble.size(), 0.0);
  parallel_for(ensemble.size(), [&](std::size_t s) {
    double sq = 0.0;
    for (std::size_t i = 0; i < dec.components.size(); ++i) {
      const auto& comp = dec.components[i];
      const Cube& c = lat.cube(comp.cube);
      if (comp.norm > 0.0 && is_bad(profiles[i], c.generation, c.size, lat.kappa(), ensemble[s], p.alpha, gap))
        sq += comp.norm * comp.norm;
    }
    norms[s] = std::sqrt(sq);
  }, 1);
  BadNormEstimate est;
  est.samples = ensemble.size();
  est.f_norm = l2_norm(space, f);
  est.bound = p.delta_bad * est.f_norm;
  est.low_confidence = ensemble.size() < kMinEnsemble;
  const double n = static_cast<double>(ensemble.size());
  if (n > 0) {
    for (double v : norms) est.mean += v / n;
    double var = 0.0;
    for (double v : norms) var += (v - est.mean) * (v - est.mean);
    est.stderr_ = n > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
  }
  est.check = est.mean <= est.bound + 3.0 * est.stderr_;
  return est;
}

struct Calibration {
  int S = 1;
  int gap = 1;
  double worst_p = 0.0;
  double worst_stderr = 0.0;
  std::size_t probes = 0;
  bool exhausted = false;
  std::string warning;
};

/// Doubles S from 1 until every probe cube has p_hat <= delta_bad^2. An S is
/// feasible while some cube with children can still be bad, i.e. while the
/// scale gap is below the lattice depth; past that point badness is vacuous.
/// When feasibility runs out first, the largest feasible S is kept and the
/// result is flagged exhausted.
inline Calibration calibrate_S(const MetricMeasureSpace& space, const DyadicLattice& lat,
                               const std::vector<Index>& probes, BadnessParams p, std::size_t ensemble_size,
                               std::uint64_t seed) {
  const auto ensemble = sample_skeletons(space, p.kappa, ensemble_size, seed);
  const double target = p.delta_bad * p.delta_bad;
  Calibration cal;
  cal.probes = probes.size();
  int feasible = 0;
  for (int S = 1; S <= 64; S *= 2) {
    p.S = S;
    if (p.gap() > lat.depth() - 1) break;
    feasible = S;
    double worst = 0.0, worst_se = 0.0;
    for (const auto& b : estimate_bad_probability(space, lat, probes, ensemble, p))
      if (b.p_hat > worst) {
        worst = b.p_hat;
        worst_se = b.stderr_;
      }
    cal.S = S;
    cal.gap = p.gap();
    cal.worst_p = worst;
    cal.worst_stderr = worst_se;
    if (worst <= target) return cal;
  }
  cal.exhausted = true;
  cal.S = std::max(feasible, 1);
  p.S = cal.S;
  cal.gap = p.gap();
  cal.warning = "calibration exhausted: lattice depth " + std::to_string(lat.depth()) +
                " admits no scale gap with bad probability below " + std::to_string(target) + "; using S = " +
                std::to_string(cal.S);
  return cal;
}

}  // namespace czkit
