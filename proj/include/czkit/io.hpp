#pragma once

// JSON readers and writers for the file formats of the command line tool.
// Point references inside files (omega, cube members and centers) use the
// point ids of the space file. Readers throw Error(InvalidInput) on any
// malformed document.

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "czkit/certify.hpp"
#include "czkit/kernel.hpp"
#include "czkit/lattice.hpp"
#include "czkit/projections.hpp"
#include "czkit/space.hpp"

namespace czkit {

using Json = nlohmann::json;

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidInput, "'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

namespace detail {

inline std::string id_string(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorCode::InvalidInput, "point ids must be strings or integers");
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidInput, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::InvalidInput, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

inline Matrix matrix_from(const Json& rows, std::size_t n) {
  if (!rows.is_array() || rows.size() != n) throw Error(ErrorCode::InvalidInput, "matrix must be n x n");
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n) throw Error(ErrorCode::InvalidInput, "matrix must be n x n");
    for (std::size_t j = 0; j < n; ++j) {
      if (!rows[i][j].is_number()) throw Error(ErrorCode::InvalidInput, "matrix entries must be numbers");
      m(i, j) = rows[i][j].get<double>();
    }
  }
  return m;
}

inline Json matrix_to(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows; ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

inline std::map<std::string, Index> id_lookup(const MetricMeasureSpace& space) {
  std::map<std::string, Index> out;
  for (Index i = 0; i < space.size(); ++i) out[space.ids()[i]] = i;
  return out;
}

inline Index lookup(const std::map<std::string, Index>& ids, const Json& v) {
  const auto it = ids.find(id_string(v));
  if (it == ids.end()) throw Error(ErrorCode::InvalidInput, "unknown point id '" + id_string(v) + "'");
  return it->second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Space

inline MetricMeasureSpace space_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "space file must be an object");
  const Json& pts = j.contains("points") ? j.at("points") : Json();
  if (!pts.is_array() || pts.empty()) throw Error(ErrorCode::InvalidInput, "space needs a nonempty 'points' array");
  const std::size_t n = pts.size();
  std::vector<std::string> ids;
  for (const auto& p : pts) ids.push_back(detail::id_string(p));
  if (std::set<std::string>(ids.begin(), ids.end()).size() != n)
    throw Error(ErrorCode::InvalidInput, "point ids must be distinct");

  const Json metric = detail::field<Json>(j, "metric");
  const auto type = detail::field<std::string>(metric, "type");
  Matrix rho;
  if (type == "euclidean") {
    const auto coords = detail::field<std::vector<std::vector<double>>>(metric, "coords");
    if (coords.size() != n) throw Error(ErrorCode::InvalidInput, "coords must have one row per point");
    rho = euclidean_distances(coords);
  } else if (type == "explicit") {
    rho = detail::matrix_from(detail::field<Json>(metric, "matrix"), n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (std::abs(rho(a, b) - rho(b, a)) > 1e-12)
          throw Error(ErrorCode::InvalidInput, "explicit metric matrix is not symmetric");
  } else {
    throw Error(ErrorCode::InvalidInput, "metric type must be 'euclidean' or 'explicit'");
  }

  const auto nu = detail::field<std::vector<double>>(j, "nu");
  const auto mu = detail::field<std::vector<double>>(j, "mu");
  std::map<std::string, Index> lookup;
  for (Index i = 0; i < n; ++i) lookup[ids[i]] = i;
  std::vector<char> omega(n, 0);
  for (const auto& v : detail::field_or<Json>(j, "omega", Json::array())) {
    const auto it = lookup.find(detail::id_string(v));
    if (it == lookup.end()) throw Error(ErrorCode::InvalidInput, "omega lists an unknown point");
    omega[it->second] = 1;
  }
  double h = detail::field_or<double>(j, "resolution_h", 0.0);
  if (!(h > 0.0)) {
    h = kInf;
    for (double d : rho.data)
      if (d > 0.0) h = std::min(h, d);
    if (!std::isfinite(h)) h = 1.0;
  }
  return MetricMeasureSpace(std::move(ids), std::move(rho), nu, mu, std::move(omega),
                            detail::field_or<double>(j, "quasi_const", 1.0), h);
}

inline Json space_to_json(const MetricMeasureSpace& s) {
  Json j;
  j["points"] = s.ids();
  j["metric"] = {{"type", "explicit"}, {"matrix", detail::matrix_to(s.rho_matrix())}};
  j["nu"] = s.nu_weights();
  j["mu"] = s.mu_weights();
  Json omega = Json::array();
  for (Index i = 0; i < s.size(); ++i)
    if (s.in_omega(i)) omega.push_back(s.ids()[i]);
  j["omega"] = omega;
  j["quasi_const"] = s.quasi_const();
  j["resolution_h"] = s.resolution_h();
  return j;
}

// ---------------------------------------------------------------------------
// Lattice

inline Json lattice_to_json(const MetricMeasureSpace& space, const DyadicLattice& lat) {
  Json j;
  j["kappa"] = lat.kappa();
  j["seed"] = lat.seed();
  Json gens = Json::array();
  for (int k = lat.k_min(); k <= lat.k_max(); ++k) {
    Json cubes = Json::array();
    for (Index id : lat.generation(k)) {
      const Cube& c = lat.cube(id);
      Json members = Json::array();
      for (Index x : c.members) members.push_back(space.ids()[x]);
      cubes.push_back({{"id", c.id},
                       {"center", space.ids()[c.center]},
                       {"members", members},
                       {"parent", c.parent ? Json(*c.parent) : Json(nullptr)}});
    }
    gens.push_back({{"k", k}, {"cubes", cubes}});
  }
  j["generations"] = gens;
  return j;
}

/// Cube ids in the file may be any distinct integers; they are renumbered.
inline DyadicLattice lattice_from_json(const MetricMeasureSpace& space, const Json& j) {
  const double kappa = detail::field<double>(j, "kappa");
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(ErrorCode::InvalidInput, "kappa must lie in (0,1)");
  const auto seed = detail::field_or<std::uint64_t>(j, "seed", 0);
  const auto ids = detail::id_lookup(space);
  std::vector<Cube> cubes;
  std::map<long long, Index> renumber;
  std::vector<std::optional<long long>> parents;
  for (const auto& g : detail::field<Json>(j, "generations")) {
    const int k = detail::field<int>(g, "k");
    for (const auto& cj : detail::field<Json>(g, "cubes")) {
      Cube c;
      c.generation = k;
      c.size = std::pow(kappa, k);
      c.center = detail::lookup(ids, detail::field<Json>(cj, "center"));
      for (const auto& x : detail::field<Json>(cj, "members")) c.members.push_back(detail::lookup(ids, x));
      std::sort(c.members.begin(), c.members.end());
      if (c.members.empty()) throw Error(ErrorCode::InvalidInput, "lattice cube without members");
      const auto fid = detail::field<long long>(cj, "id");
      if (!renumber.emplace(fid, cubes.size()).second) throw Error(ErrorCode::InvalidInput, "duplicate cube id");
      const Json p = cj.contains("parent") ? cj.at("parent") : Json(nullptr);
      parents.push_back(p.is_null() ? std::nullopt : std::optional<long long>(p.get<long long>()));
      cubes.push_back(std::move(c));
    }
  }
  if (cubes.empty()) throw Error(ErrorCode::InvalidInput, "lattice without cubes");
  for (Index i = 0; i < cubes.size(); ++i) {
    if (!parents[i]) continue;
    const auto it = renumber.find(*parents[i]);
    if (it == renumber.end()) throw Error(ErrorCode::InvalidInput, "parent refers to an unknown cube");
    cubes[i].parent = it->second;
    cubes[it->second].children.push_back(i);
  }
  return DyadicLattice::from_cubes(space, kappa, std::move(cubes), seed);
}

// ---------------------------------------------------------------------------
// Kernel

/// {type, params:{c, m, tau, delta, diagonal}} or, for explicit kernels,
/// {type: "explicit", matrix, params:{m, tau, delta, C_CZ}}.
inline KernelSpec kernel_from_json(const MetricMeasureSpace& space, const Json& j) {
  const auto type = detail::field<std::string>(j, "type");
  const Json p = detail::field_or<Json>(j, "params", Json::object());
  const double c = detail::field_or<double>(p, "c", 1.0);
  const double m = detail::field_or<double>(p, "m", 1.0);
  const double tau = detail::field_or<double>(p, "tau", 1.0);
  const double delta = detail::field_or<double>(p, "delta", 0.5);
  const auto diag = detail::field_or<std::string>(p, "diagonal", "");
  if (!diag.empty() && diag != "zero" && diag != "truncate")
    throw Error(ErrorCode::InvalidInput, "diagonal must be 'zero' or 'truncate'");
  auto policy = [&](DiagonalPolicy fallback) {
    return diag.empty() ? fallback : (diag == "zero" ? DiagonalPolicy::Zero : DiagonalPolicy::Truncate);
  };
  if (type == "power") return power_kernel(space, c, m, tau, delta, policy(DiagonalPolicy::Zero));
  if (type == "bergman") return bergman_kernel(space, c, m, tau, delta, policy(DiagonalPolicy::Zero));
  if (type == "constant") return constant_kernel(space, c, m, policy(DiagonalPolicy::Truncate));
  if (type == "zero") return zero_kernel(space, m);
  if (type == "explicit") {
    Matrix values = detail::matrix_from(detail::field<Json>(j, "matrix"), space.size());
    return explicit_kernel(space, std::move(values), m, tau, delta, detail::field_or<double>(p, "C_CZ", 0.0),
                           policy(DiagonalPolicy::Truncate));
  }
  throw Error(ErrorCode::InvalidInput, "unknown kernel type '" + type + "'");
}

inline Json kernel_to_json(const KernelSpec& k) {
  Json j;
  j["type"] = "explicit";
  j["matrix"] = detail::matrix_to(k.values);
  j["params"] = {{"m", k.m},
                 {"tau", k.tau},
                 {"delta", k.delta_CZ},
                 {"C_CZ", k.C_CZ},
                 {"diagonal", k.diagonal == DiagonalPolicy::Zero ? "zero" : "truncate"}};
  return j;
}

// ---------------------------------------------------------------------------
// Functions and reports

inline FunctionVector vector_from_json(const MetricMeasureSpace& space, const Json& j) {
  if (!j.is_array() || j.size() != space.size())
    throw Error(ErrorCode::InvalidInput, "function vector must have one entry per point");
  FunctionVector f;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::InvalidInput, "function values must be numbers");
    f.push_back(v.get<double>());
  }
  return f;
}

inline Json decomposition_to_json(const DyadicLattice& lat, const MartingaleDecomposition& dec,
                                  const ProjectionReport& rep) {
  Json comps = Json::array();
  for (const auto& c : dec.components)
    comps.push_back({{"cube", c.cube}, {"generation", lat.cube(c.cube).generation}, {"norm", c.norm}});
  return {{"lambda_part", dec.lambda_part},
          {"components", comps},
          {"reconstruction_error", rep.reconstruction_error},
          {"pythagoras_error", rep.pythagoras_error},
          {"idempotence_error", rep.idempotence_error},
          {"orthogonality_error", rep.orthogonality_error},
          {"lambda_orthogonality_error", rep.lambda_orthogonality_error},
          {"zero_mean_error", rep.zero_mean_error},
          {"pass", rep.ok()}};
}

/// Non-finite numbers have no JSON literal; they are written as strings.
inline Json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline Json certificate_to_json(const CertificateReport& r) {
  Json constants = Json::object();
  for (const auto& [k, v] : r.constants) constants[k] = number(v);
  Json lemmas = Json::array();
  for (const auto& l : r.lemmas) {
    Json e = {{"name", l.name},
              {"paper_ref", l.paper_ref},
              {"measured", number(l.measured)},
              {"bound", number(l.bound)},
              {"pass", l.pass}};
    if (l.informational) e["informational"] = true;
    if (!l.note.empty()) e["note"] = l.note;
    lemmas.push_back(e);
  }
  return {{"constants", constants},
          {"lemmas", lemmas},
          {"certified_total", number(r.certified_total)},
          {"empirical_norm", number(r.empirical_norm)},
          {"verdict", r.verdict},
          {"calibration",
           {{"S", r.calibration.S},
            {"gap", r.calibration.gap},
            {"worst_p", r.calibration.worst_p},
            {"worst_stderr", r.calibration.worst_stderr},
            {"exhausted", r.calibration.exhausted}}},
          {"warnings", r.warnings}};
}

}  // namespace czkit
