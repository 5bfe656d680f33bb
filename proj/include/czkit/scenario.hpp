#pragma once

// One end-to-end run: verify the space and kernel, build and classify a
// lattice, decompose a probe function, certify. Stages run in that order and
// the run stops at the first failing stage, keeping what was computed. The
// certificate fields sit at the top level of the report.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include "czkit/certify.hpp"
#include "czkit/examples.hpp"
#include "czkit/io.hpp"

namespace czkit {

inline constexpr const char* kVersion = "0.1.0";

struct Scenario {
  std::string name = "scenario";
  std::string example;  // built-in space and kernel, or empty
  ExampleParams example_params;
  std::string space_path;
  std::string kernel_path;  // overrides the example kernel when set
  std::optional<double> m;  // growth exponent; defaults to the example or kernel value
  std::uint64_t seed = 11;
  CertifyParams certify;
  bool run_certify = true;
  std::size_t max_points = 4096;
  bool allow_large = false;
  bool timings = false;  // wall-clock times make the report non-reproducible
  std::string report_path;
};

inline void validate(const Scenario& s) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidInput, msg); };
  if (s.example.empty() == s.space_path.empty()) bad("scenario needs exactly one of 'example' and 'space'");
  if (!(s.certify.kappa > 0.0 && s.certify.kappa < 1.0)) bad("kappa must lie in (0,1)");
  if (!(s.certify.delta_bad > 0.0 && s.certify.delta_bad < 1.0)) bad("delta_bad must lie in (0,1)");
  if (s.m && !(*s.m > 0.0)) bad("m must be > 0");
  if (s.certify.S < 0) bad("S must be positive or 'calibrate'");
  if (s.certify.ensemble < kMinEnsemble) bad("ensemble must hold at least " + std::to_string(kMinEnsemble) + " lattices");
  if (s.certify.lattice_pairs == 0) bad("lattice_pairs must be >= 1");
  if (!(s.certify.lambda_bmo > 1.0)) bad("lambda_bmo must be > 1");
  if (!(s.certify.norm_tol > 0.0)) bad("norm_tol must be > 0");
}

/// Relative paths in the file resolve against `base_dir`.
inline Scenario scenario_from_json(const Json& j, const std::string& base_dir = ".") {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "scenario must be an object");
  Scenario s;
  auto path = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (std::filesystem::path(base_dir) / fp).string();
  };
  s.name = detail::field_or<std::string>(j, "name", s.name);
  if (j.contains("space")) {
    const Json& sp = j.at("space");
    if (sp.is_string()) {
      s.space_path = path(sp.get<std::string>());
    } else if (sp.is_object() && sp.contains("example")) {
      s.example = detail::field<std::string>(sp, "example");
      const Json p = detail::field_or<Json>(sp, "params", Json::object());
      s.example_params.n = detail::field_or<int>(p, "n", s.example_params.n);
      s.example_params.depth = detail::field_or<int>(p, "depth", s.example_params.depth);
      s.example_params.scale = detail::field_or<double>(p, "scale", s.example_params.scale);
      s.example_params.kernel_c = detail::field_or<double>(p, "kernel_c", s.example_params.kernel_c);
    } else {
      throw Error(ErrorCode::InvalidInput, "'space' must be a path or {example, params}");
    }
  }
  if (j.contains("kernel")) s.kernel_path = path(detail::field<std::string>(j, "kernel"));
  if (j.contains("m")) s.m = detail::field<double>(j, "m");
  s.seed = detail::field_or<std::uint64_t>(j, "seed", s.seed);
  auto& c = s.certify;
  c.kappa = detail::field_or<double>(j, "kappa", c.kappa);
  c.delta_bad = detail::field_or<double>(j, "delta_bad", c.delta_bad);
  if (j.contains("S")) {
    const Json& v = j.at("S");
    if (v.is_string() && v.get<std::string>() == "calibrate") c.S = 0;
    else if (v.is_number_integer() && v.get<int>() > 0) c.S = v.get<int>();
    else throw Error(ErrorCode::InvalidInput, "S must be a positive integer or \"calibrate\"");
  }
  c.ensemble = detail::field_or<std::size_t>(j, "ensemble", c.ensemble);
  c.lattice_pairs = detail::field_or<std::size_t>(j, "lattice_pairs", c.lattice_pairs);
  c.probes = detail::field_or<std::size_t>(j, "probes", c.probes);
  c.lambda_bmo = detail::field_or<double>(j, "lambda_bmo", c.lambda_bmo);
  c.K_bmo = detail::field_or<double>(j, "K_bmo", c.K_bmo);
  c.norm_tol = detail::field_or<double>(j, "norm_tol", c.norm_tol);
  s.run_certify = detail::field_or<bool>(j, "certify", s.run_certify);
  s.max_points = detail::field_or<std::size_t>(j, "max_points", s.max_points);
  s.allow_large = detail::field_or<bool>(j, "allow_large", s.allow_large);
  s.timings = detail::field_or<bool>(j, "timings", s.timings);
  if (j.contains("report")) s.report_path = path(detail::field<std::string>(j, "report"));
  return s;
}

inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["name"] = s.name;
  if (!s.example.empty())
    j["space"] = {{"example", s.example},
                  {"params",
                   {{"n", s.example_params.n},
                    {"depth", s.example_params.depth},
                    {"scale", s.example_params.scale},
                    {"kernel_c", s.example_params.kernel_c}}}};
  else
    j["space"] = s.space_path;
  if (!s.kernel_path.empty()) j["kernel"] = s.kernel_path;
  if (s.m) j["m"] = *s.m;
  j["seed"] = s.seed;
  j["kappa"] = s.certify.kappa;
  j["delta_bad"] = s.certify.delta_bad;
  j["S"] = s.certify.S > 0 ? Json(s.certify.S) : Json("calibrate");
  j["ensemble"] = s.certify.ensemble;
  j["lattice_pairs"] = s.certify.lattice_pairs;
  j["probes"] = s.certify.probes;
  j["lambda_bmo"] = s.certify.lambda_bmo;
  j["K_bmo"] = s.certify.K_bmo;
  j["norm_tol"] = s.certify.norm_tol;
  j["certify"] = s.run_certify;
  j["max_points"] = s.max_points;
  return j;
}

struct Instance {
  MetricMeasureSpace space;
  KernelSpec kernel;
  double m = 1.0;
};

/// Bytes held by the distance and kernel matrices.
inline double matrix_memory_estimate(std::size_t n) { return 2.0 * 8.0 * double(n) * double(n); }

inline Instance load_instance(const Scenario& s) {
  std::optional<Instance> inst;
  if (!s.example.empty()) {
    auto ex = generate_example(s.example, s.example_params);
    inst.emplace(Instance{std::move(ex.space), std::move(ex.kernel), ex.m});
  } else {
    auto space = space_from_json(read_json_file(s.space_path));
    if (s.kernel_path.empty()) throw Error(ErrorCode::InvalidInput, "a space file needs a kernel file");
    auto k = kernel_from_json(space, read_json_file(s.kernel_path));
    const double m = k.m;
    inst.emplace(Instance{std::move(space), std::move(k), m});
  }
  if (!s.example.empty() && !s.kernel_path.empty())
    inst->kernel = kernel_from_json(inst->space, read_json_file(s.kernel_path));
  if (s.m) inst->m = *s.m;
  return std::move(*inst);
}

struct RunReport {
  Json report;
  bool pass = false;
  bool input_error = false;

  int exit_code() const { return input_error ? 2 : (pass ? 0 : 1); }
};

/// Never throws a czkit::Error. Bad inputs give exit code 2, failed checks
/// and errors raised by a stage give exit code 1; both are recorded.
inline RunReport run(const Scenario& s) {
  RunReport out;
  Json& r = out.report;
  r["version"] = kVersion;
  r["scenario"] = scenario_to_json(s);
  r["seed"] = s.seed;
  Json stages = Json::object();
  Json times = Json::object();
  using clock = std::chrono::steady_clock;
  auto stamp = clock::now();
  auto lap = [&](const char* name) {
    const auto now = clock::now();
    times[name] = std::chrono::duration<double>(now - stamp).count();
    stamp = now;
  };
  auto finish = [&](bool pass) {
    r["stages"] = stages;
    if (s.timings) r["timings"] = times;
    r["pass"] = pass;
    out.pass = pass;
    return out;
  };
  try {
    validate(s);
    Instance inst = load_instance(s);
    const auto& space = inst.space;
    const auto& k = inst.kernel;
    if (space.size() > s.max_points && !s.allow_large)
      throw Error(ErrorCode::InvalidInput, std::to_string(space.size()) + " points exceed the limit of " +
                                               std::to_string(s.max_points) + " (matrices need about " +
                                               std::to_string(matrix_memory_estimate(space.size()) / 1e6) +
                                               " MB); pass allow_large to proceed");
    validate_kernel(k, space.size());

    // verify
    Json v;
    const auto qm = verify_quasi_metric(space);
    v["quasi_metric"] = {{"ok", qm.ok}, {"worst_ratio", qm.worst_ratio}};
    const auto growth = check_growth_condition(space, inst.m, geometric_radii(space, s.certify.kappa));
    const auto cap = verify_omega_capture(space, growth);
    v["omega_capture"] = {{"ok", cap.ok}, {"non_ahlfors_balls", growth.non_ahlfors.size()}};
    if (cap.witness)
      v["omega_capture"]["witness"] = {{"center", space.ids()[cap.witness->center]},
                                       {"radius", cap.witness->radius}};
    const auto sm = check_size_and_smoothness(k, space);
    v["kernel"] = {{"C_size", sm.C_size},
                   {"C_smooth_x", sm.C_smooth_x},
                   {"C_smooth_y", sm.C_smooth_y},
                   {"C_CZ", k.C_CZ},
                   {"pass", sm.pass}};
    bool verify_ok = qm.ok && cap.ok && sm.pass;
    if (k.dominated_by_d && !space.omega_is_whole_space()) {
      const auto dom = check_d_domination(k, space, inst.m);
      v["domination"] = {{"worst_ratio", dom.worst_ratio}, {"pass", dom.pass}};
      verify_ok = verify_ok && dom.pass;
    }
    v["pass"] = verify_ok;
    stages["verify"] = v;
    lap("verify");
    if (!verify_ok) return finish(false);

    // lattice
    DyadicLattice lat = build_lattice(space, s.certify.kappa, mix_seed(s.seed, 0));
    const auto lr = verify_lattice_properties(lat, space);
    const auto tr = classify_terminal_transit(lat, space, inst.m);
    stages["lattice"] = {{"ok", lr.ok()},
                         {"depth", lat.depth()},
                         {"cubes", lat.size()},
                         {"c_diam", lr.c_diam},
                         {"a0", number(lr.a0)},
                         {"terminal", tr.n_terminal},
                         {"transit", tr.n_transit},
                         {"failures", lr.failures}};
    lap("lattice");
    if (!lr.ok()) return finish(false);

    // decompose a random probe
    std::mt19937_64 rng(mix_seed(s.seed, 1));
    FunctionVector f(space.size());
    for (auto& x : f) x = uniform01(rng) - 0.5;
    const auto dec = decompose(space, lat, f);
    const auto pr = properties_check(space, lat, dec, f);
    stages["decompose"] = {{"components", dec.components.size()},
                           {"reconstruction_error", pr.reconstruction_error},
                           {"pythagoras_error", pr.pythagoras_error},
                           {"pass", pr.ok()}};
    lap("decompose");
    if (!pr.ok()) return finish(false);

    if (s.run_certify) {
      CertifyParams cp = s.certify;
      cp.seed = s.seed;
      const auto cert = certify(k, space, cp, inst.m);
      const Json cj = certificate_to_json(cert);
      for (const auto& [key, val] : cj.items()) r[key] = val;
      lap("certify");
      return finish(cert.verdict);
    }
    return finish(true);
  } catch (const Error& e) {
    out.input_error = e.code() == ErrorCode::InvalidInput || e.code() == ErrorCode::UnknownExample;
    r["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
    return finish(false);
  }
}

}  // namespace czkit
