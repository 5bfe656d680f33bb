#include <catch_amalgamated.hpp>

#include "czkit/lattice.hpp"

using namespace czkit;
using Catch::Approx;

namespace {

MetricMeasureSpace grid(int n, double spacing = 1.0) {
  std::vector<std::vector<double>> c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.push_back({i * spacing, j * spacing});
  return make_euclidean_space(c);
}

MetricMeasureSpace integer_line(int n, std::vector<char> omega = {}, std::vector<double> mu = {}) {
  std::vector<std::vector<double>> c;
  for (int i = 0; i < n; ++i) c.push_back({double(i)});
  return make_euclidean_space(c, {}, std::move(mu), std::move(omega), 1.0);
}

Cube make_cube(int k, PointSet members, Index center, std::optional<Index> parent, std::vector<Index> children,
               double kappa = 0.5) {
  Cube c;
  c.generation = k;
  c.members = std::move(members);
  c.center = center;
  c.parent = parent;
  c.children = std::move(children);
  c.size = std::pow(kappa, k);
  return c;
}

// Independent reimplementation of the bad-cube definition: plain loops over
// every pair, the skeleton recomputed from scratch.
bool brute_bad(const DyadicLattice& a, Index q, const DyadicLattice& b, const MetricMeasureSpace& s,
               double alpha, int gap) {
  const Cube& cq = a.cube(q);
  for (const Cube& r : b.cubes()) {
    if (r.generation > cq.generation - gap || r.children.empty()) continue;
    PointSet sk;
    for (Index ch : r.children)
      for (Index x : b.cube(ch).members)
        for (Index y = 0; y < s.size(); ++y)
          if (y != x && s.rho(x, y) <= s.resolution_h() &&
              !std::binary_search(b.cube(ch).members.begin(), b.cube(ch).members.end(), y)) {
            sk.push_back(x);
            break;
          }
    double d = kInf;
    for (Index x : cq.members)
      for (Index y : sk) d = std::min(d, s.rho(x, y));
    if (d < std::pow(cq.size, alpha) * std::pow(r.size, 1.0 - alpha)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("single point space gives one cube", "[lattice]") {
  auto s = make_euclidean_space({{0.0}});
  auto lat = build_lattice(s, 0.5, 3, 0);
  REQUIRE(lat.size() == 1);
  REQUIRE(lat.cube(lat.root()).members == PointSet{0});
  REQUIRE(verify_lattice_properties(lat, s).ok());
}

TEST_CASE("four equispaced points share one root", "[lattice]") {
  auto s = integer_line(4);
  auto lat = build_lattice(s, 0.5, 1, 0);
  const Cube& root = lat.cube(lat.root());
  REQUIRE(root.members == PointSet{0, 1, 2, 3});
  REQUIRE(lat.generation(lat.k_min()).size() == 1);
  // finest generation consists of singletons
  for (Index id : lat.generation(lat.k_max())) REQUIRE(lat.cube(id).members.size() == 1);
}

TEST_CASE("64-point grid lattices for two seeds", "[lattice]") {
  auto s = grid(8);
  auto a = build_lattice(s, 0.5, 1);
  auto b = build_lattice(s, 0.5, 2);
  auto ra = verify_lattice_properties(a, s);
  auto rb = verify_lattice_properties(b, s);
  REQUIRE(ra.ok());
  REQUIRE(rb.ok());
  REQUIRE(ra.c_diam < 4.0);
  bool differ = false;
  for (int k = std::max(a.k_min(), b.k_min()); k <= std::min(a.k_max(), b.k_max()); ++k) {
    std::vector<PointSet> ca, cb;
    for (Index id : a.generation(k)) ca.push_back(a.cube(id).members);
    for (Index id : b.generation(k)) cb.push_back(b.cube(id).members);
    std::sort(ca.begin(), ca.end());
    std::sort(cb.begin(), cb.end());
    if (ca != cb) differ = true;
  }
  REQUIRE(differ);
}

TEST_CASE("lattice build is deterministic in the seed", "[lattice]") {
  auto s = grid(6);
  auto a = build_lattice(s, 0.5, 9);
  auto b = build_lattice(s, 0.5, 9);
  REQUIRE(a.size() == b.size());
  for (Index i = 0; i < a.size(); ++i) REQUIRE(a.cube(i).members == b.cube(i).members);
}

TEST_CASE("overlapping siblings are reported", "[lattice]") {
  auto s = integer_line(4);
  std::vector<Cube> cubes = {
      make_cube(0, {0, 1, 2, 3}, 0, {}, {1, 2}),
      make_cube(1, {0, 1, 2}, 0, 0, {}),
      make_cube(1, {2, 3}, 3, 0, {}),
  };
  auto lat = DyadicLattice::from_cubes(s, 0.5, cubes);
  auto rep = verify_lattice_properties(lat, s);
  REQUIRE_FALSE(rep.nesting);
  REQUIRE(rep.overlap_witness.has_value());
  REQUIRE(rep.overlap_witness->first == 1);
  REQUIRE(rep.overlap_witness->second == 2);
}

TEST_CASE("single cube lattice has vacuous small-boundary constant", "[lattice]") {
  auto s = integer_line(4);
  auto lat = DyadicLattice::from_cubes(s, 0.5, {make_cube(0, {0, 1, 2, 3}, 1, {}, {})});
  auto rep = verify_lattice_properties(lat, s);
  REQUIRE(rep.c6 == 0.0);
  REQUIRE(rep.ok());
}

TEST_CASE("scale below resolution is rejected", "[lattice]") {
  auto s = integer_line(4);
  REQUIRE_THROWS_AS(build_lattice(s, 0.5, 1, 3), Error);
}

TEST_CASE("skeleton of a split integer line", "[lattice]") {
  auto s = integer_line(8);
  std::vector<Cube> cubes = {
      make_cube(0, {0, 1, 2, 3, 4, 5, 6, 7}, 0, {}, {1, 2}),
      make_cube(1, {0, 1, 2, 3}, 0, 0, {}),
      make_cube(1, {4, 5, 6, 7}, 4, 0, {}),
  };
  auto lat = DyadicLattice::from_cubes(s, 0.5, cubes);
  REQUIRE(skeleton(lat, 0) == PointSet{3, 4});
  REQUIRE(skeleton(lat, 1).empty());
}

TEST_CASE("terminal and transit flags", "[lattice]") {
  SECTION("empty omega and positive mu: everything transit") {
    auto s = integer_line(8);
    auto lat = build_lattice(s, 0.5, 4);
    auto rep = classify_terminal_transit(lat, s, 1.0);
    REQUIRE(rep.n_terminal == 0);
    REQUIRE(rep.n_transit == lat.size());
    REQUIRE(rep.growth_constant > 0.0);
  }
  SECTION("parent inside omega makes a cube terminal") {
    std::vector<char> omega = {0, 0, 0, 0, 1, 1, 1, 1};
    auto s = integer_line(8, omega);
    std::vector<Cube> cubes = {
        make_cube(0, {0, 1, 2, 3, 4, 5, 6, 7}, 0, {}, {1, 2}),
        make_cube(1, {0, 1, 2, 3}, 0, 0, {3, 4}),
        make_cube(1, {4, 5, 6, 7}, 4, 0, {5, 6}),
        make_cube(2, {0, 1}, 0, 1, {}),
        make_cube(2, {2, 3}, 2, 1, {}),
        make_cube(2, {4, 5}, 4, 2, {}),
        make_cube(2, {6, 7}, 6, 2, {}),
    };
    auto lat = DyadicLattice::from_cubes(s, 0.5, cubes);
    classify_terminal_transit(lat, s, 1.0);
    REQUIRE(lat.cube(2).transit());
    REQUIRE(lat.cube(5).terminal);
    REQUIRE(lat.cube(6).terminal);
    REQUIRE(lat.cube(3).transit());
  }
  SECTION("zero-mass root is rejected") {
    auto s = integer_line(4, {}, {0.0, 0.0, 0.5, 0.5});
    std::vector<Cube> cubes = {make_cube(0, {0, 1}, 0, {}, {})};
    auto lat = DyadicLattice::from_cubes(s, 0.5, cubes);
    REQUIRE_THROWS_AS(classify_terminal_transit(lat, s, 1.0), Error);
  }
}

TEST_CASE("goodness exponent and scale gap", "[lattice]") {
  REQUIRE(goodness_exponent(1.0, 1.0) == Approx(0.25));
  for (int S = 1; S <= 5; ++S) REQUIRE(scale_gap(0.5, 0.25, S) == 2 * S);
  REQUIRE(scale_gap(0.5, 0.5, 3) == 3);
}

TEST_CASE("good/bad classification matches brute force", "[lattice]") {
  auto s = grid(10);
  auto a = build_lattice(s, 0.5, 11);
  auto b = build_lattice(s, 0.5, 12);
  const double alpha = goodness_exponent(1.0, 1.0);
  for (int gap : {1, 2, 3}) {
    for (Index q = 0; q < a.size(); ++q) {
      auto res = classify_good_bad(a, q, b, s, alpha, gap);
      REQUIRE(res.bad == brute_bad(a, q, b, s, alpha, gap));
      if (res.bad) {
        REQUIRE(res.witness.has_value());
        REQUIRE(res.distance < res.threshold);
      }
    }
  }
}

TEST_CASE("profile-based classification agrees with the direct one", "[lattice]") {
  auto s = grid(9);
  auto a = build_lattice(s, 0.5, 31);
  auto b = build_lattice(s, 0.5, 32);
  const auto sg = skeleton_generation(b, s.size());
  for (int gap : {1, 2, 4}) {
    for (Index q = 0; q < a.size(); ++q) {
      const Cube& c = a.cube(q);
      const bool fast = is_bad(distance_profile(s, c.members), c.generation, c.size, 0.5, sg, 0.25, gap);
      REQUIRE(fast == classify_good_bad(a, q, b, s, 0.25, gap).bad);
    }
  }
}

TEST_CASE("larger scale gap only turns bad cubes good", "[lattice]") {
  auto s = grid(10);
  auto a = build_lattice(s, 0.5, 21);
  auto b = build_lattice(s, 0.5, 22);
  const double alpha = 0.25;
  for (Index q = 0; q < a.size(); ++q) {
    const bool bad1 = classify_good_bad(a, q, b, s, alpha, 1).bad;
    const bool bad3 = classify_good_bad(a, q, b, s, alpha, 3).bad;
    REQUIRE((bad1 || !bad3));
  }
}

TEST_CASE("cube next to a coarse split is bad", "[lattice]") {
  auto s = integer_line(8);
  // lattice b: root split at 3|4, then pairs, then singletons
  std::vector<Cube> cb = {
      make_cube(0, {0, 1, 2, 3, 4, 5, 6, 7}, 0, {}, {1, 2}),
      make_cube(1, {0, 1, 2, 3}, 0, 0, {}),
      make_cube(1, {4, 5, 6, 7}, 4, 0, {}),
  };
  auto b = DyadicLattice::from_cubes(s, 0.5, cb);
  std::vector<Cube> ca = {
      make_cube(0, {0, 1, 2, 3, 4, 5, 6, 7}, 0, {}, {1}),
      make_cube(1, {0, 1, 2, 3, 4, 5, 6, 7}, 0, 0, {2, 3}),
      make_cube(2, {3}, 3, 1, {}),
      make_cube(2, {0, 1, 2, 4, 5, 6, 7}, 0, 1, {}),
  };
  auto a = DyadicLattice::from_cubes(s, 0.5, ca);
  auto res = classify_good_bad(a, 2, b, s, 0.25, 2);
  REQUIRE(res.bad);
  REQUIRE(*res.witness == 0);
  // the generation-1 cube is not r=2 generations finer than any cube of b
  REQUIRE_FALSE(classify_good_bad(a, 1, b, s, 0.25, 2).bad);
}
