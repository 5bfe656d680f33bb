#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "czkit/kernel.hpp"

using namespace czkit;
using Catch::Approx;

namespace {

MetricMeasureSpace line(int n, std::vector<double> mu = {}, std::vector<char> omega = {}) {
  std::vector<std::vector<double>> c;
  for (int i = 0; i < n; ++i) c.push_back({double(i)});
  return make_euclidean_space(c, {}, std::move(mu), std::move(omega), 1.0);
}

FunctionVector random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FunctionVector f(n);
  for (auto& v : f) v = 2.0 * uniform01(rng) - 1.0;
  return f;
}

Matrix random_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(n, n);
  for (auto& v : m.data) v = 2.0 * uniform01(rng) - 1.0;
  return m;
}

std::vector<double> random_probability(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> w(n);
  for (auto& v : w) v = 0.1 + uniform01(rng);
  return normalized(w);
}

// Dense oracle: largest singular value of D^1/2 K D^1/2.
double svd_norm(const KernelSpec& k, const MetricMeasureSpace& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      M(i, j) = std::sqrt(s.mu(i)) * k(i, j) * std::sqrt(s.mu(j));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

}  // namespace

TEST_CASE("averaging kernel", "[kernel]") {
  auto s = line(10);
  auto k1 = constant_kernel(s, 1.0, 1.0, DiagonalPolicy::Truncate);
  auto t = apply(k1, s, FunctionVector(10, 1.0));
  for (double v : t) REQUIRE(v == Approx(1.0));
  auto k0 = constant_kernel(s, 1.0, 1.0, DiagonalPolicy::Zero);
  auto t0 = apply(k0, s, FunctionVector(10, 1.0));
  for (Index x = 0; x < 10; ++x) REQUIRE(t0[x] == Approx(1.0 - s.mu(x)));
  auto nr = operator_norm(k1, s, 1e-10, 1000, 3);
  REQUIRE(nr.converged);
  REQUIRE(nr.value == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("apply of zero function and zero kernel", "[kernel]") {
  auto s = line(6);
  auto k = power_kernel(s, 1.0, 1.0);
  for (double v : apply(k, s, FunctionVector(6, 0.0))) REQUIRE(v == 0.0);
  auto z = zero_kernel(s);
  REQUIRE(operator_norm(z, s).value == 0.0);
}

TEST_CASE("apply matches a dense multiply", "[kernel]") {
  auto s = make_euclidean_space({{0.0}, {0.7}, {1.1}, {2.0}, {3.5}, {3.9}, {5.0}, {6.2}}, {},
                                random_probability(8, 4));
  auto k = power_kernel(s, 1.0, 1.0);
  auto f = random_vector(8, 2);
  auto t = apply(k, s, f);
  for (Index x = 0; x < 8; ++x) {
    double acc = 0.0;
    for (Index y = 0; y < 8; ++y)
      if (y != x) acc += f[y] * s.mu(y) / std::abs(x == y ? 1.0 : s.rho(x, y));
    REQUIRE(t[x] == Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("adjoint", "[kernel]") {
  auto s = make_euclidean_space({{0.0}, {0.5}, {1.3}, {2.0}, {2.2}, {4.0}}, {}, random_probability(6, 9));
  SECTION("symmetric kernel") {
    auto k = power_kernel(s, 1.0, 1.0);
    auto f = random_vector(6, 1);
    auto a = apply(k, s, f);
    auto b = adjoint_apply(k, s, f);
    for (Index x = 0; x < 6; ++x) REQUIRE(a[x] == Approx(b[x]));
  }
  SECTION("rank one") {
    Matrix m(6, 6);
    for (Index y = 0; y < 6; ++y) m(2, y) = 1.0 + double(y);
    auto k = explicit_kernel(s, m, 1.0, 1.0, 0.5, 1.0);
    auto g = random_vector(6, 3);
    auto t = adjoint_apply(k, s, g);
    // T*g(x) = k(2,x) g(2) mu(2)
    for (Index x = 0; x < 6; ++x) REQUIRE(t[x] == Approx(m(2, x) * g[2] * s.mu(2)));
  }
  SECTION("pairing symmetry for a random kernel") {
    auto k = explicit_kernel(s, random_matrix(6, 5), 1.0, 1.0, 0.5, 1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto f = random_vector(6, seed);
      auto g = random_vector(6, seed + 100);
      const double lhs = inner(s, apply(k, s, f), g);
      const double rhs = inner(s, f, adjoint_apply(k, s, g));
      REQUIRE(std::abs(lhs - rhs) <= 1e-12);
    }
  }
}

TEST_CASE("non-finite kernel values are rejected", "[kernel]") {
  auto s = line(3);
  Matrix m(3, 3, 1.0);
  m(0, 1) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(explicit_kernel(s, m, 1.0, 1.0, 0.5, 1.0), Error);
}

TEST_CASE("size and smoothness fits", "[kernel]") {
  auto s = line(12);
  SECTION("power kernel: size constant is exact") {
    auto k = power_kernel(s, 1.0, 1.0);
    auto rep = check_size_and_smoothness(k, s);
    REQUIRE(rep.C_size == Approx(1.0));
    REQUIRE(rep.pass);
    REQUIRE(rep.C_smooth() <= k.C_CZ + 1e-12);
    // on the integer line the extremal triple is x'=x+-1 with rho(x,y)=2, ratio (1 - 1/2)*4/1 = 2
    REQUIRE(rep.C_smooth_x == Approx(2.0));
  }
  SECTION("zero kernel") {
    auto rep = check_size_and_smoothness(zero_kernel(s), s);
    REQUIRE(rep.C_size == 0.0);
    REQUIRE(rep.C_smooth() == 0.0);
    REQUIRE(rep.pass);
  }
}

TEST_CASE("truncated Cauchy-type kernel on 32 points matches a brute-force triple loop", "[kernel]") {
  std::vector<std::vector<double>> c;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 32; ++i) c.push_back({uniform01(rng) * 8.0, uniform01(rng) * 2.0});
  auto s = make_euclidean_space(c);
  Matrix m(32, 32);
  for (Index x = 0; x < 32; ++x)
    for (Index y = 0; y < 32; ++y)
      if (x != y) m(x, y) = (c[x][0] - c[y][0]) / std::max(s.rho(x, y) * s.rho(x, y), 0.25);
  auto k = explicit_kernel(s, m, 1.0, 1.0, 0.5, 100.0);
  auto rep = check_size_and_smoothness(k, s);
  double size = 0.0, sx = 0.0, sy = 0.0;
  for (Index x = 0; x < 32; ++x)
    for (Index y = 0; y < 32; ++y) {
      if (x == y) continue;
      const double r = s.rho(x, y);
      size = std::max(size, std::abs(m(x, y)) * r);
      for (Index z = 0; z < 32; ++z) {
        if (z != x && z != y && s.rho(x, z) <= 0.5 * r)
          sx = std::max(sx, std::abs(m(x, y) - m(z, y)) * r * r / s.rho(x, z));
        if (z != y && z != x && s.rho(y, z) <= 0.5 * r)
          sy = std::max(sy, std::abs(m(x, y) - m(x, z)) * r * r / s.rho(y, z));
      }
    }
  REQUIRE(rep.C_size == Approx(size));
  REQUIRE(rep.C_smooth_x == Approx(sx));
  REQUIRE(rep.C_smooth_y == Approx(sy));
}

TEST_CASE("declared family constants dominate the fitted ones", "[kernel]") {
  std::vector<std::vector<double>> c;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) c.push_back({0.5 * i, 0.5 * j});
  std::vector<char> omega(49, 0);
  for (int i = 0; i < 7; ++i)
    for (int j = 2; j <= 4; ++j) omega[i * 7 + j] = 1;
  auto s = make_euclidean_space(c, {}, {}, omega);
  for (double m : {0.6, 1.0, 1.5}) {
    REQUIRE(check_size_and_smoothness(power_kernel(s, 1.0, m), s).pass);
    REQUIRE(check_size_and_smoothness(bergman_kernel(s, 1.0, m), s).pass);
  }
}

TEST_CASE("d-domination", "[kernel]") {
  std::vector<char> omega = {0, 0, 1, 1, 1, 1, 0, 0};
  auto s = line(8, {}, omega);
  SECTION("bergman model") {
    auto k = bergman_kernel(s, 1.0, 1.0);
    auto rep = check_d_domination(k, s, 1.0);
    REQUIRE(rep.pass);
    REQUIRE(rep.worst_ratio <= 1.0 + 1e-12);
  }
  SECTION("pure d-kernel attains equality") {
    auto d = dist_to_complement_all(s);
    Matrix m(8, 8);
    for (Index x = 0; x < 8; ++x)
      for (Index y = 0; y < 8; ++y) {
        const double dm = std::max(d[x], d[y]);
        if (x != y && dm > 0.0) m(x, y) = 1.0 / dm;
      }
    auto k = explicit_kernel(s, m, 1.0, 1.0, 0.5, 10.0);
    auto rep = check_d_domination(k, s, 1.0);
    REQUIRE(rep.pass);
    REQUIRE(rep.worst_ratio == Approx(1.0));
  }
  SECTION("zero kernel") { REQUIRE(check_d_domination(zero_kernel(s), s, 1.0).pass); }
  SECTION("power kernel violates it") {
    REQUIRE_FALSE(check_d_domination(power_kernel(s, 4.0, 1.0), s, 1.0).pass);
  }
  SECTION("omega = X") {
    auto all = line(4, {}, {1, 1, 1, 1});
    REQUIRE_THROWS_AS(check_d_domination(zero_kernel(all), all, 1.0), Error);
  }
}

TEST_CASE("T1 testing constant", "[kernel]") {
  auto s = line(16);
  auto lat = build_lattice(s, 0.5, 2);
  SECTION("zero kernel") { REQUIRE(check_T1(zero_kernel(s), s, lat).A == 0.0); }
  SECTION("averaging kernel: ratio equals mu(Q)") {
    auto k = constant_kernel(s, 1.0, 1.0, DiagonalPolicy::Truncate);
    auto rep = check_T1(k, s, lat, {});
    REQUIRE(rep.A <= 1.0 + 1e-12);
    for (const auto& q : lat.cubes()) REQUIRE(rep.ratio_direct[q.id] == Approx(s.mu_of(q.members)));
  }
  SECTION("power kernel: exhaustive recomputation and necessity") {
    auto k = power_kernel(s, 1.0, 1.0);
    auto rep = check_T1(k, s, lat, {1.2, 1.4, 1.5});
    double a = 0.0;
    for (const auto& q : lat.cubes()) {
      FunctionVector chi(16, 0.0);
      for (Index x : q.members) chi[x] = 1.0;
      const double t = l2_norm(s, apply(k, s, chi));
      const double ta = l2_norm(s, adjoint_apply(k, s, chi));
      a = std::max({a, t * t / s.mu_of(q.members), ta * ta / s.mu_of(q.members)});
    }
    REQUIRE(rep.families.front().lambda == 1.0);
    REQUIRE(std::max(rep.families.front().A_direct, rep.families.front().A_adjoint) == Approx(a));
    // restricting the family can only lower A
    REQUIRE(rep.A >= a - 1e-15);
    const double norm = operator_norm(k, s, 1e-10).value;
    REQUIRE(rep.A <= norm * norm + 1e-9);
  }
}

TEST_CASE("operator norm against a dense SVD", "[kernel]") {
  auto s = make_euclidean_space({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}, {5.0}, {6.0}, {7.0}, {8.0}, {9.0}, {10.0},
                                 {11.0}, {12.0}, {13.0}, {14.0}, {15.0}},
                                {}, random_probability(16, 12));
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto k = explicit_kernel(s, random_matrix(16, seed), 1.0, 1.0, 0.5, 1.0);
    auto nr = operator_norm(k, s, 1e-12, 200000, seed);
    REQUIRE(nr.converged);
    REQUIRE(nr.value == Approx(svd_norm(k, s)).epsilon(1e-8));
  }
  auto k = power_kernel(s, 1.0, 1.0);
  const double a = operator_norm(k, s, 1e-12).value;
  const double b = operator_norm(k.scaled(-3.0), s, 1e-12).value;
  REQUIRE(b == Approx(3.0 * a).epsilon(1e-8));
  // deterministic given the seed
  REQUIRE(operator_norm(k, s, 1e-8, 1000, 5).value == operator_norm(k, s, 1e-8, 1000, 5).value);
}

TEST_CASE("iteration cap flags low confidence", "[kernel]") {
  auto s = line(16);
  auto k = explicit_kernel(s, random_matrix(16, 4), 1.0, 1.0, 0.5, 1.0);
  auto nr = operator_norm(k, s, 1e-15, 2, 1);
  REQUIRE_FALSE(nr.converged);
  REQUIRE(nr.value > 0.0);
}
