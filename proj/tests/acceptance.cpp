// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Eigen serves only as an independent dense-SVD oracle.

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "czkit/certify.hpp"
#include "czkit/examples.hpp"
#include "czkit/scenario.hpp"

using namespace czkit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

FunctionVector random_fn(std::size_t n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  FunctionVector f(n);
  for (auto& v : f) v = uniform01(rng) - 0.5 + shift;
  return f;
}

// random points in the unit square; mu has random weights and a few holes
MetricMeasureSpace random_space(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> pts(n);
  for (auto& p : pts) p = {uniform01(rng), uniform01(rng)};
  std::vector<double> mu(n);
  for (auto& w : mu) w = uniform01(rng) < 0.1 ? 0.0 : 0.2 + uniform01(rng);
  return make_euclidean_space(pts, std::vector<double>(n, 1.0 / n), normalized(mu));
}

double oracle_norm(const Matrix& M) {
  if (M.rows == 0 || M.cols == 0) return 0.0;
  Eigen::MatrixXd E(M.rows, M.cols);
  for (std::size_t i = 0; i < M.rows; ++i)
    for (std::size_t j = 0; j < M.cols; ++j) E(i, j) = M(i, j);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(E).singularValues()(0);
}

// L2(mu) norm of the kernel operator through the dense oracle
double oracle_operator_norm(const KernelSpec& k, const MetricMeasureSpace& s) {
  std::vector<Index> supp;
  for (Index x = 0; x < s.size(); ++x)
    if (s.mu(x) > 0.0) supp.push_back(x);
  Matrix M(supp.size(), supp.size());
  for (std::size_t i = 0; i < supp.size(); ++i)
    for (std::size_t j = 0; j < supp.size(); ++j)
      M(i, j) = std::sqrt(s.mu(supp[i]) * s.mu(supp[j])) * k(supp[i], supp[j]);
  return oracle_norm(M);
}

struct Triple {
  MetricMeasureSpace space;
  DyadicLattice lat;
  FunctionVector f;
};

std::vector<Triple> random_triples() {
  std::vector<Triple> out;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t n = 32 + 52 * i;  // 32 .. 1020
    auto s = random_space(n, 100 + i);
    auto lat = build_lattice(s, i % 3 == 0 ? 0.4 : 0.5, 200 + i);
    classify_terminal_transit(lat, s, 2.0);
    auto f = random_fn(n, 300 + i, i % 2 ? 0.3 : 0.0);
    out.push_back({std::move(s), std::move(lat), std::move(f)});
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome martingale_identity(const std::vector<Triple>& triples, double build_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  double recon = 0.0, pyth = 0.0;
  for (const auto& t : triples) {
    const auto rep = properties_check(t.space, t.lat, decompose(t.space, t.lat, t.f), t.f);
    recon = std::max(recon, rep.reconstruction_error);
    pyth = std::max(pyth, rep.pythagoras_error);
  }
  const double secs = build_seconds + seconds_since(t0);
  return {recon <= 1e-10 && pyth <= 1e-10 && secs < 10.0,
          fmt("%zu triples, N <= 1020: reconstruction %.1e, Pythagoras %.1e, %.2f s", triples.size(), recon, pyth,
              secs)};
}

Outcome projection_algebra(const std::vector<Triple>& triples) {
  double idem = 0.0, orth = 0.0, lam = 0.0;
  for (const auto& t : triples) {
    const auto rep = properties_check(t.space, t.lat, decompose(t.space, t.lat, t.f), t.f);
    idem = std::max(idem, rep.idempotence_error);
    orth = std::max(orth, rep.orthogonality_error);
    lam = std::max(lam, rep.lambda_orthogonality_error);
  }
  return {idem <= 1e-10 && orth <= 1e-10 && lam <= 1e-10,
          fmt("idempotence %.1e, orthogonality %.1e, Lambda-orthogonality %.1e", idem, orth, lam)};
}

Outcome regrouping(const CertificateReport& line_cert) {
  // every probe pair certify evaluates on the scenario
  const LemmaCheck* l = line_cert.find("regrouping");
  double worst = l ? l->measured : kInf;

  // and an independent pass over the same lattice pairs with fresh probes
  const auto ex = generate_example("line_in_plane");
  const CertifyParams p;
  const double alpha = goodness_exponent(ex.kernel.tau, ex.m);
  std::size_t pairs = 0;
  for (std::size_t li = 0; li < p.lattice_pairs; ++li) {
    const auto lp = make_lattice_pair(ex.space, ex.m, p.kappa, mix_seed(p.seed, 2 * li),
                                      mix_seed(p.seed, 2 * li + 1), alpha, line_cert.calibration.gap);
    std::mt19937_64 rng(77 + li);
    for (int i = 0; i < 6; ++i) {
      const auto f = probe_function(ex.space, lp.d1, i % 3, rng);
      const auto g = probe_function(ex.space, lp.d2, (i + 1) % 3, rng);
      const auto sp =
          split_bilinear(ex.kernel, ex.space, lp, decompose(ex.space, lp.d1, f), decompose(ex.space, lp.d2, g));
      worst = std::max(worst, sp.relative_error());
      ++pairs;
    }
  }
  return {l && l->pass && worst <= 1e-9,
          fmt("line_in_plane: certify probes plus %zu fresh pairs, worst relative error %.1e", pairs, worst)};
}

struct CantorMC {
  Example ex;
  DyadicLattice lat;
  BadnessParams bp;
  Calibration cal;
  std::vector<std::vector<int>> ens;
};

CantorMC cantor_monte_carlo() {
  auto ex = generate_example("cantor_measure");
  auto lat = build_lattice(ex.space, 0.5, 1);
  classify_terminal_transit(lat, ex.space, ex.m);
  BadnessParams bp;
  bp.alpha = goodness_exponent(ex.kernel.tau, ex.m);
  bp.delta_bad = 0.25;
  const auto probes = component_cubes(lat);
  auto cal = calibrate_S(ex.space, lat, probes, bp, 400, 3);
  bp.S = cal.S;
  auto ens = sample_skeletons(ex.space, 0.5, 400, 99);
  return {std::move(ex), std::move(lat), bp, cal, std::move(ens)};
}

Outcome bad_probability(const CantorMC& mc, double secs) {
  std::size_t fails = 0, cubes = 0;
  double worst = 0.0;
  for (const auto& b : estimate_bad_probability(mc.ex.space, mc.lat, component_cubes(mc.lat), mc.ens, mc.bp)) {
    ++cubes;
    worst = std::max(worst, b.p_hat - 3.0 * b.stderr_);
    fails += !b.within(1.0 / 16.0);
  }
  return {!mc.cal.exhausted && fails == 0 && cubes > 0 && secs < 120.0,
          fmt("cantor_measure, S = %d (gap %d), %zu lattices, %zu probe cubes, max p_hat - 3 stderr = %.4f "
              "<= 0.0625, %.1f s",
              mc.bp.S, mc.bp.gap(), mc.ens.size(), cubes, worst, secs)};
}

Outcome expected_bad(const CantorMC& mc) {
  std::mt19937_64 rng(5);
  bool ok = true;
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const auto f = probe_function(mc.ex.space, mc.lat, i % 3, rng);
    const auto est = expected_bad_norm(mc.ex.space, mc.lat, f, mc.ens, mc.bp);
    ok = ok && est.check;
    worst = std::max(worst, (est.mean - 3.0 * est.stderr_) / est.f_norm);
  }
  return {ok, fmt("5 probe functions, max (E||f_bad|| - 3 stderr)/||f|| = %.4f <= 0.25", worst)};
}

Outcome far_interaction() {
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  for (const char* name : {"line_in_plane", "cantor_measure"}) {
    const auto ex = generate_example(name);
    const auto& s = ex.space;
    const double alpha = goodness_exponent(ex.kernel.tau, ex.m);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
      for (int gap : {2, 4}) {
        const auto lp = make_lattice_pair(s, ex.m, 0.5, seed, seed + 20, alpha, gap);
        const auto geo = bilinear_geometry(s, ex.kernel, lp);
        for (const Half* h : {&geo.first, &geo.second}) {
          const auto f = random_fn(s.size(), seed * 10 + gap), g = random_fn(s.size(), seed * 10 + gap + 1);
          for (const auto& p : h->pairs) {
            if (p.kind != PairKind::Far || !p.admissible) continue;
            const Index q = h->qs[p.q].id, r = h->rs[p.r].id;
            const auto phi = delta_proj(s, *h->a, f, q);
            const auto psi = delta_proj(s, *h->b, g, r);
            // the power kernel is symmetric, so both halves use it as is
            const auto fb = far_interaction_bound(s, ex.kernel, *h->a, q, *h->b, r, phi, psi, alpha);
            ++checked;
            failed += !(fb.pass && fb.regime_ok);
            if (fb.bound > 0.0) worst = std::max(worst, fb.measured / fb.bound);
          }
        }
      }
  }
  return {checked > 0 && failed == 0,
          fmt("%zu admissible pairs on line_in_plane and cantor_measure, %zu failures, worst ratio %.3f", checked,
              failed, worst)};
}

Outcome schur_soundness() {
  std::size_t instances = 0, failed = 0, attempts = 0;
  double worst = 0.0;
  std::mt19937_64 pick(8);
  while (instances < 60 && attempts < 400) {
    ++attempts;
    const std::size_t n = 24 + attempts % 5 * 24;
    const auto s = random_space(n, 1000 + attempts);
    const double m = attempts % 2 ? 1.0 : 2.0;
    const auto k = power_kernel(s, 1.0, m);
    const auto lp = make_lattice_pair(s, m, 0.5, 2 * attempts, 2 * attempts + 1, goodness_exponent(1.0, m),
                                      1 + int(attempts % 3));
    const auto geo = bilinear_geometry(s, k, lp);
    const double keep_p = 0.4 + 0.6 * uniform01(pick);
    const auto M = half_long_range_matrix(attempts % 2 ? geo.first : geo.second, [&](const PairInfo& p) {
      return p.kind == PairKind::Far && uniform01(pick) < keep_p;
    });
    if (M.entries.empty() || M.rows.size() > 200 || M.cols.size() > 200) continue;
    ++instances;
    const double C = long_range_schur_constant(s, M).C;
    const double oracle = oracle_norm(M.dense());
    failed += !(oracle <= C * (1.0 + 1e-12));
    worst = std::max(worst, oracle / C);
  }
  return {instances >= 50 && failed == 0,
          fmt("%zu random long-range matrices (<= 200 x 200), %zu failures, max oracle/Schur = %.3f", instances,
              failed, worst)};
}

Outcome block_matrix() {
  std::size_t instances = 0, failed = 0, spectral = 0, spectral_failed = 0;
  double worst = 0.0;
  std::vector<Example> spaces;
  for (const char* name : {"line_in_plane", "cantor_measure", "bergman_disc_model"})
    spaces.push_back(generate_example(name));
  // small random planes keep many instances under 100 cubes
  for (std::uint64_t i = 0; i < 12; ++i) {
    auto s = random_space(16 + 4 * i, 500 + i);
    auto k = power_kernel(s, 1.0, 1.0);
    spaces.push_back({"random", std::move(s), std::move(k), 1.0, 2.0});
  }
  for (const auto& ex : spaces) {
    const double alpha = goodness_exponent(ex.kernel.tau, ex.m);
    for (std::uint64_t seed = 1; seed <= 4; ++seed)
      for (int gap : {2, 4}) {
        const auto lp = make_lattice_pair(ex.space, ex.m, 0.5, seed, seed + 30, alpha, gap);
        const auto geo = bilinear_geometry(ex.space, ex.kernel, lp);
        for (const Half* h : {&geo.first, &geo.second}) {
          const auto M = half_block_matrix(ex.space, *h);
          if (M.entries.empty()) continue;
          for (std::uint64_t t = 0; t < 3; ++t) {
            const auto a = random_fn(M.rows.size(), seed + 7 * t, 0.5), b = random_fn(M.cols.size(), seed + 9 * t, 0.5);
            ++instances;
            failed += !block_matrix_bound(M, a, b).pass;
          }
          if (M.rows.size() + M.cols.size() <= 100) {
            ++spectral;
            const double bound = 1.0 / (1.0 - std::pow(M.kappa, M.tau / 2.0));
            const double oracle = oracle_norm(M.dense());
            spectral_failed += !(oracle <= bound);
            worst = std::max(worst, oracle / bound);
          }
        }
      }
  }
  return {instances > 0 && failed == 0 && spectral > 0 && spectral_failed == 0,
          fmt("%zu block instances, %zu failures; %zu spectral comparisons (<= 100 cubes), max norm/bound = %.3f",
              instances, failed, spectral, worst)};
}

Outcome paraproduct_carleson() {
  // line example: identity and the Carleson sequence over all transit components
  const auto ex = generate_example("line_in_plane");
  const auto& s = ex.space;
  const int gap = 2;
  const auto lp = make_lattice_pair(s, ex.m, 0.5, 1, 2, goodness_exponent(ex.kernel.tau, ex.m), gap);
  const auto F = adjoint_apply(ex.kernel, s, FunctionVector(s.size(), 1.0));
  const auto comps = component_cubes(lp.d1);
  double id_err = 0.0;
  ParaproductResult pp;
  for (std::uint64_t t = 0; t < 5; ++t) {
    pp = paraproduct_apply(s, lp.d1, lp.d2, comps, F, random_fn(s.size(), 40 + t, 0.2), gap);
    id_err = std::max(id_err, pp.identity_error());
  }
  std::map<Index, std::vector<Index>> by_r;
  for (Index q : comps)
    if (const auto r = paraproduct_parent(lp.d1, q, lp.d2, gap)) by_r[*r].push_back(q);
  const auto carl = carleson_embedding_check(s, lp.d2, pp.a);
  const double A = check_T1(ex.kernel, s, lp.d1, {1.2, 1.4, 1.5}).A;
  const auto bmo = pseudo_bmo_check(s, lp.d1, F, 1.4, 0.0, ex.m, &ex.kernel, A);
  const auto wh = whitney_pieces(s, lp.d1, lp.d2, by_r);
  const double line_bound = wh.multiplicity * bmo.C_fit;
  bool ok = id_err <= 1e-10 && pp.identity_sum > 0.0 && std::isfinite(carl.constant) &&
            carl.constant <= line_bound * (1.0 + 1e-12);

  // the good-part sequence certify uses, on the other examples
  std::size_t halves = 0, strict_fail = 0;
  for (const char* name : {"cantor_measure", "bergman_disc_model", "uniform_grid"}) {
    const auto e = generate_example(name);
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
      const auto lq = make_lattice_pair(e.space, e.m, 0.5, seed, seed + 10, goodness_exponent(e.kernel.tau, e.m), 4);
      const auto an = analyze_pair(e.kernel, e.space, lq, CertifyParams{});
      for (const HalfConstants* h : {&an.pc.first, &an.pc.second}) {
        ++halves;
        const double c = h->carleson.constant;
        strict_fail += !(std::isfinite(c) && c <= h->whitney.multiplicity * h->bmo.C_fit * (1.0 + 1e-12) &&
                         c <= h->bmo.C_fit * h->whitney.chain_ratio * (1.0 + 1e-12));
      }
    }
  }
  ok = ok && strict_fail == 0;
  return {ok, fmt("line identity error %.1e; line Carleson %.3g <= %.3g (multiplicity %.0f x C %.3g); "
                  "%zu further halves, %zu failures",
                  id_err, carl.constant, line_bound, wh.multiplicity, bmo.C_fit, halves, strict_fail)};
}

Outcome pseudo_bmo() {
  std::size_t cubes = 0;
  bool ok = true;
  double tail = 0.0, near = 0.0;
  auto run_on = [&](const MetricMeasureSpace& s, const KernelSpec& k, double m, std::uint64_t seed) {
    auto lat = build_lattice(s, 0.5, seed);
    classify_terminal_transit(lat, s, m);
    const auto F = adjoint_apply(k, s, FunctionVector(s.size(), 1.0));
    const double A = check_T1(k, s, lat, {1.2, 1.4, 1.5}).A;
    const auto rep = pseudo_bmo_check(s, lat, F, 1.4, 0.0, m, &k, A);
    cubes += rep.admissible;
    ok = ok && rep.split_checked && rep.tail_pass && rep.near_pass && !rep.vacuous;
    if (rep.C_tail > 0.0) tail = std::max(tail, rep.tail_worst / rep.C_tail);
    near = std::max(near, rep.near_worst);
  };
  const auto disc = generate_example("bergman_disc_model");
  const auto line = generate_example("line_in_plane");
  const auto line_k = bergman_kernel(line.space, 1.0, line.m);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    run_on(disc.space, disc.kernel, disc.m, seed);
    run_on(line.space, line_k, line.m, seed);
  }
  return {ok && cubes > 0, fmt("d(x)-dominated kernels on bergman_disc_model and line_in_plane: %zu admissible "
                               "cubes, max tail/C(K,Lambda,tau) = %.3f, max near/(A mu(Lambda Q)) = %.3f",
                               cubes, tail, near)};
}

Outcome end_to_end() {
  bool ok = true;
  std::string detail;
  for (const auto& name : example_names()) {
    Scenario sc;
    sc.example = name;
    const auto rr = run(sc);
    const auto& r = rr.report;
    const bool hypotheses = r.contains("stages") && r["stages"].contains("verify") &&
                            r["stages"]["verify"].value("pass", false) && r.contains("empirical_norm");
    if (!hypotheses) {
      detail += name + " fails hypotheses (skipped); ";
      continue;
    }
    const double emp = r["empirical_norm"].get<double>();
    const double cert = r["certified_total"].get<double>();
    const auto ex = generate_example(name);
    const double oracle = oracle_operator_norm(ex.kernel, ex.space);
    const bool good = rr.pass && emp <= cert && std::abs(emp - oracle) <= 1e-6 * std::max(1.0, oracle);
    ok = ok && good;
    detail += fmt("%s %.4f <= %.1f (oracle %.4f)%s; ", name.c_str(), emp, cert, oracle, good ? "" : " FAIL");
  }
  // averaging kernel
  const auto line = generate_example("line_in_plane");
  CertifyParams p;
  p.lattice_pairs = 1;
  const auto cert = certify(constant_kernel(line.space, 1.0, line.m), line.space, p, line.m);
  const bool avg = std::abs(cert.empirical_norm - 1.0) <= 1e-8 && cert.verdict;
  ok = ok && avg;
  detail += fmt("k = 1: %.10f", cert.empirical_norm);
  return {ok, detail};
}

Outcome t1_necessity() {
  std::size_t checks = 0, failed = 0;
  double worst = -kInf;
  auto sweep = [&](const MetricMeasureSpace& s, const KernelSpec& k) {
    const double n = operator_norm(k, s, 1e-12).value;
    for (std::uint64_t seed : {1, 2}) {
      const auto lat = build_lattice(s, 0.5, seed);
      for (const auto& c : lat.cubes()) {
        const auto t = apply_indicator(k, s, c.members, false);
        double lhs = 0.0;
        for (Index x = 0; x < s.size(); ++x) lhs += t[x] * t[x] * s.mu(x);
        const double slack = lhs - n * n * s.mu_of(c.members);
        ++checks;
        failed += !(slack <= 1e-9);
        worst = std::max(worst, slack);
      }
    }
  };
  for (const auto& name : example_names()) {
    const auto ex = generate_example(name);
    sweep(ex.space, ex.kernel);
    sweep(ex.space, constant_kernel(ex.space, 1.0, ex.m));
    sweep(ex.space, zero_kernel(ex.space, ex.m));
    sweep(ex.space, bergman_kernel(ex.space, 1.0, ex.m));
  }
  return {failed == 0, fmt("%zu (kernel, cube) checks, %zu failures, max ||T 1_Q||^2 - ||T||^2 mu(Q) = %.2e", checks,
                           failed, worst)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2d %-24s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  const auto t0 = std::chrono::steady_clock::now();
  const auto triples = random_triples();
  const double build = seconds_since(t0);
  report(1, "martingale identity", [&] { return martingale_identity(triples, build); });
  report(2, "projection algebra", [&] { return projection_algebra(triples); });

  const auto line = generate_example("line_in_plane");
  const auto line_cert = certify(line.kernel, line.space, CertifyParams{}, line.m);
  report(3, "exact regrouping", [&] { return regrouping(line_cert); });

  const auto t_mc = std::chrono::steady_clock::now();
  const auto mc = cantor_monte_carlo();
  const double mc_build = seconds_since(t_mc);
  report(4, "bad-cube probability", [&] { return bad_probability(mc, mc_build); });
  report(5, "expected bad norm", [&] { return expected_bad(mc); });
  report(6, "far interaction", far_interaction);
  report(7, "Schur soundness", schur_soundness);
  report(8, "block matrix bound", block_matrix);
  report(9, "paraproduct / Carleson", paraproduct_carleson);
  report(10, "pseudo-BMO", pseudo_bmo);
  report(11, "end to end", end_to_end);
  report(12, "T1 necessity", t1_necessity);

  std::printf("%s: %d of 12 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
