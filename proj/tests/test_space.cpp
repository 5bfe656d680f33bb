#include <catch_amalgamated.hpp>

#include <random>

#include "czkit/space.hpp"

using namespace czkit;
using Catch::Approx;

namespace {

MetricMeasureSpace line(std::size_t n, std::vector<char> omega = {}) {
  std::vector<std::vector<double>> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({static_cast<double>(i)});
  return make_euclidean_space(c, {}, {}, std::move(omega), 1.0);
}

}  // namespace

TEST_CASE("collinear points form a metric", "[space]") {
  auto s = make_euclidean_space({{0.0}, {1.0}, {3.0}});
  REQUIRE(verify_quasi_metric(s).ok);
}

TEST_CASE("asymmetric rho is reported", "[space]") {
  Matrix rho(3, 3);
  rho(0, 1) = 1.0;
  rho(1, 0) = 2.0;
  rho(0, 2) = rho(2, 0) = 1.0;
  rho(1, 2) = rho(2, 1) = 1.0;
  MetricMeasureSpace s({"a", "b", "c"}, rho, {1, 1, 1}, {0.5, 0.25, 0.25}, {0, 0, 0}, 1.0, 0.5);
  auto rep = verify_quasi_metric(s);
  REQUIRE_FALSE(rep.ok);
  REQUIRE_FALSE(rep.symmetric);
}

TEST_CASE("random planar points satisfy the triangle inequality", "[space]") {
  std::mt19937_64 rng(5);
  std::vector<std::vector<double>> c;
  for (int i = 0; i < 10; ++i) c.push_back({uniform01(rng), uniform01(rng)});
  auto s = make_euclidean_space(c);
  auto rep = verify_quasi_metric(s);
  REQUIRE(rep.ok);
  REQUIRE(rep.worst_ratio <= 1.0 + 1e-12);
}

TEST_CASE("open balls", "[space]") {
  auto s = line(4);
  REQUIRE(ball(s, 1, 0.0).empty());
  REQUIRE(ball(s, 1, 1.5) == PointSet{0, 1, 2});
  REQUIRE(ball(s, 1, 1.0) == PointSet{1});
  REQUIRE(ball(s, 0, 10.0).size() == 4);
  REQUIRE(ball(s, 2, s.resolution_h() / 2) == PointSet{2});
}

TEST_CASE("doubling constant formula", "[space]") {
  REQUIRE(doubling_constant(1.0, 2.0, 2.0) == Approx(8.0));
}

TEST_CASE("16x16 unit grid is Ahlfors regular at radii 2,4,8", "[space]") {
  std::vector<std::vector<double>> c;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) c.push_back({double(i), double(j)});
  auto s = make_euclidean_space(c);
  auto rep = check_ahlfors_regularity(s, 2.0, {2.0, 4.0, 8.0});
  REQUIRE(rep.c1 > 0.0);
  REQUIRE(rep.c1 < rep.c2);
  // r=2: an interior open ball holds 9 points
  REQUIRE(rep.c2 >= 9.0 / 4.0);
  auto with_target = check_ahlfors_regularity(s, 2.0, {2.0, 4.0, 8.0}, std::pair{rep.c1, rep.c2});
  REQUIRE(with_target.violations.empty());
  REQUIRE_THROWS_AS(check_ahlfors_regularity(s, 2.0, {}), Error);
}

TEST_CASE("scaling nu scales c1,c2 and keeps c_doub", "[space]") {
  auto s = line(9);
  auto radii = geometric_radii(s);
  auto a = check_ahlfors_regularity(s, 1.0, radii);
  auto b = check_ahlfors_regularity(s.with_nu(std::vector<double>(9, 3.0)), 1.0, radii);
  REQUIRE(b.c1 == Approx(3.0 * a.c1));
  REQUIRE(b.c2 == Approx(3.0 * a.c2));
  REQUIRE(b.c_doub == Approx(a.c_doub));
}

TEST_CASE("single point space is degenerate", "[space]") {
  auto s = make_euclidean_space({{0.0}});
  REQUIRE(check_ahlfors_regularity(s, 1.0, {1.0}).degenerate);
}

TEST_CASE("growth condition on a uniform line", "[space]") {
  const std::size_t n = 8;
  auto s = line(n);
  std::vector<double> radii = {1.0, 2.0, 4.0, 7.0};
  auto g = check_growth_condition(s, 1.0, radii);
  // open balls: r=1 holds 1 point, r=2 holds 3, r=4 up to 7, r=7 all 8
  REQUIRE(g.c_h == Approx(7.0 / 32.0));
  REQUIRE(g.non_ahlfors.empty());
}

TEST_CASE("point mass is non-Ahlfors at small radii", "[space]") {
  Matrix rho = euclidean_distances({{0.0}, {1.0}, {2.0}});
  MetricMeasureSpace s({"a", "b", "c"}, rho, {1, 1, 1}, {1.0, 0.0, 0.0}, {0, 0, 0}, 1.0, 0.25);
  auto g = check_growth_condition(s, 1.0, {0.25, 0.5});
  REQUIRE(g.non_ahlfors.size() == 2);
  REQUIRE(g.non_ahlfors[0].center == 0);
  REQUIRE_FALSE(verify_omega_capture(s, g).ok);
  auto captured = s.with_omega({1, 1, 1});
  REQUIRE(verify_omega_capture(captured, g).ok);
  auto cover = s.with_omega(non_ahlfors_cover(s, g));
  REQUIRE(verify_omega_capture(cover, g).ok);
}

TEST_CASE("zero mu region has no non-Ahlfors balls", "[space]") {
  Matrix rho = euclidean_distances({{0.0}, {1.0}, {2.0}, {10.0}});
  MetricMeasureSpace s({"a", "b", "c", "d"}, rho, {1, 1, 1, 1}, {0.0, 0.0, 0.0, 1.0}, {0, 0, 0, 0}, 1.0, 1.0);
  auto g = check_growth_condition(s, 1.0, {1.0, 2.0});
  for (const auto& b : g.non_ahlfors) REQUIRE(b.center == 3);
}

TEST_CASE("distance to the complement of omega", "[space]") {
  auto s = line(6, {0, 0, 1, 1, 0, 0});
  REQUIRE(dist_to_complement(s, 3) == 1.0);
  REQUIRE(dist_to_complement(s, 0) == 0.0);
  auto none = line(6);
  for (Index x = 0; x < 6; ++x) REQUIRE(dist_to_complement(none, x) == 0.0);
  auto all = line(6, std::vector<char>(6, 1));
  REQUIRE(std::isinf(dist_to_complement(all, 2)));
  REQUIRE(all.omega_is_whole_space());
}

TEST_CASE("dilations", "[space]") {
  auto s = line(6);
  REQUIRE(dilate(s, {0, 1}, 1.0) == PointSet{0, 1});
  REQUIRE(dilate(s, {3}, 5.0) == PointSet{3});
  REQUIRE(dilate(s, {0, 1}, 2.0) == PointSet{0, 1, 2});
  REQUIRE(dilate(s, {2, 3}, 2.0) == PointSet{1, 2, 3, 4});
  REQUIRE_THROWS_AS(dilate(s, {}, 2.0), Error);
  const PointSet e{1, 2};
  PointSet prev = e;
  for (double l : {1.0, 1.5, 2.0, 3.0, 4.0}) {
    auto d = dilate(s, e, l);
    REQUIRE(is_subset(prev, d));
    prev = d;
  }
}

TEST_CASE("omega capture is monotone in omega", "[space]") {
  Matrix rho = euclidean_distances({{0.0}, {0.1}, {2.0}, {3.0}});
  MetricMeasureSpace s({"a", "b", "c", "d"}, rho, {1, 1, 1, 1}, {0.5, 0.5, 0.0, 0.0}, {1, 1, 0, 0}, 1.0, 0.1);
  auto g = check_growth_condition(s, 1.0, geometric_radii(s));
  const bool small = verify_omega_capture(s, g).ok;
  const bool big = verify_omega_capture(s.with_omega({1, 1, 1, 1}), g).ok;
  REQUIRE((!small || big));
  REQUIRE(big);
}

TEST_CASE("invalid spaces are rejected", "[space]") {
  Matrix rho = euclidean_distances({{0.0}, {1.0}});
  REQUIRE_THROWS_AS(MetricMeasureSpace({"a", "b"}, rho, {1, 1}, {0.5, 0.4}, {0, 0}, 1.0, 1.0), Error);
  REQUIRE_THROWS_AS(MetricMeasureSpace({"a", "b"}, rho, {1, 1}, {0.5, 0.5}, {0, 0}, 0.5, 1.0), Error);
  REQUIRE_THROWS_AS(MetricMeasureSpace({"a", "b"}, rho, {1, 1}, {0.5, 0.5}, {0, 0}, 1.0, 0.0), Error);
}
