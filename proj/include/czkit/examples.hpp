#pragma once

// Built-in example spaces with a matching kernel. Each generator picks a
// geometric scale so that the growth condition mu(B(x,r)) <= r^m fails only
// on small balls, and puts those balls into omega.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "czkit/kernel.hpp"
#include "czkit/space.hpp"

namespace czkit {

struct ExampleParams {
  int n = 16;             // grid side (line_in_plane, uniform_grid), ring count (bergman_disc_model)
  int depth = 5;          // cantor_measure level
  double scale = 0.0;     // side length or radius; <= 0 picks the default for the example
  double kernel_c = 1.0;  // kernel amplitude
};

struct Example {
  std::string name;
  MetricMeasureSpace space;
  KernelSpec kernel;
  double m = 1.0;      // growth exponent of mu
  double n_dim = 1.0;  // Ahlfors dimension of nu
};

inline const std::vector<std::string>& example_names() {
  static const std::vector<std::string> names = {"line_in_plane", "cantor_measure", "bergman_disc_model",
                                                 "uniform_grid"};
  return names;
}

namespace detail {

inline std::vector<char> with_cover(const MetricMeasureSpace& s, std::vector<char> omega, double m) {
  const auto cover = growth_cover(s, m);
  for (std::size_t i = 0; i < omega.size(); ++i) omega[i] = omega[i] || cover[i];
  return omega;
}

inline std::vector<std::vector<double>> square_grid(int n, double side) {
  std::vector<std::vector<double>> c;
  const double step = n > 1 ? side / (n - 1) : 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.push_back({j * step, i * step});
  return c;
}

}  // namespace detail

/// n x n grid on a square of side `scale` (default 2.5), nu uniform, mu
/// uniform on the middle row, omega the rows next to it plus every
/// non-Ahlfors ball.
inline Example line_in_plane(const ExampleParams& p) {
  const int n = p.n;
  if (n < 2) throw Error(ErrorCode::InvalidInput, "line_in_plane needs n >= 2");
  const double side = p.scale > 0.0 ? p.scale : 2.5;
  const auto coords = detail::square_grid(n, side);
  const std::size_t N = coords.size();
  const int row = n / 2;
  std::vector<double> mu(N, 0.0);
  std::vector<char> omega(N, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == row) mu[i * n + j] = 1.0;
      if (std::abs(i - row) <= 1) omega[i * n + j] = 1;
    }
  auto s = make_euclidean_space(coords, std::vector<double>(N, 1.0 / N), normalized(mu), omega);
  s = s.with_omega(detail::with_cover(s, omega, 1.0));
  auto k = power_kernel(s, p.kernel_c, 1.0);
  return {"line_in_plane", std::move(s), std::move(k), 1.0, 2.0};
}

/// Grid of 3^L + 1 points on [0, scale] (default 3) with mu uniform on the
/// left endpoints of the 2^L level-L Cantor intervals.
inline Example cantor_measure(const ExampleParams& p) {
  const int L = p.depth;
  if (L < 0 || L > 8) throw Error(ErrorCode::InvalidInput, "cantor_measure depth must lie in [0,8]");
  const double side = p.scale > 0.0 ? p.scale : 3.0;
  const long cells = std::lround(std::pow(3.0, L));
  std::vector<std::vector<double>> coords;
  for (long i = 0; i <= cells; ++i) coords.push_back({side * static_cast<double>(i) / cells});
  std::vector<double> mu(coords.size(), 0.0);
  for (long i = 0; i < cells; ++i) {
    // i is a left endpoint iff its base-3 digits avoid 1
    long v = i;
    bool ok = true;
    for (int d = 0; d < L; ++d, v /= 3)
      if (v % 3 == 1) ok = false;
    if (ok) mu[i] = 1.0;
  }
  if (L == 0) mu[0] = 1.0;
  const double m = std::log(2.0) / std::log(3.0);
  auto s = make_euclidean_space(coords, std::vector<double>(coords.size(), 1.0 / coords.size()), normalized(mu));
  s = s.with_omega(detail::with_cover(s, std::vector<char>(coords.size(), 0), m));
  auto k = power_kernel(s, p.kernel_c, m);
  return {"cantor_measure", std::move(s), std::move(k), m, 1.0};
}

/// Concentric rings in a disc of radius `scale` (default 1): the centre plus
/// n rings, ring i holding 6i points. mu is uniform on the two outer rings;
/// omega is everything off the boundary ring, so d(x) is the distance to the
/// boundary circle.
inline Example bergman_disc_model(const ExampleParams& p) {
  const int rings = p.n;
  if (rings < 2) throw Error(ErrorCode::InvalidInput, "bergman_disc_model needs at least two rings");
  const double radius = p.scale > 0.0 ? p.scale : 1.0;
  std::vector<std::vector<double>> coords = {{0.0, 0.0}};
  std::vector<int> ring_of = {0};
  for (int i = 1; i <= rings; ++i) {
    const double r = radius * i / rings;
    for (int j = 0; j < 6 * i; ++j) {
      const double t = 2.0 * std::numbers::pi * j / (6 * i);
      coords.push_back({r * std::cos(t), r * std::sin(t)});
      ring_of.push_back(i);
    }
  }
  const std::size_t N = coords.size();
  std::vector<double> mu(N, 0.0);
  std::vector<char> omega(N, 0);
  for (std::size_t x = 0; x < N; ++x) {
    if (ring_of[x] >= rings - 1) mu[x] = 1.0;
    omega[x] = ring_of[x] < rings;
  }
  auto s = make_euclidean_space(coords, std::vector<double>(N, 1.0 / N), normalized(mu), omega);
  auto omega2 = detail::with_cover(s, omega, 1.0);
  // the boundary ring must stay outside omega for d to be finite
  for (std::size_t x = 0; x < N; ++x)
    if (ring_of[x] == rings) omega2[x] = 0;
  s = s.with_omega(omega2);
  auto k = bergman_kernel(s, p.kernel_c, 1.0);
  return {"bergman_disc_model", std::move(s), std::move(k), 1.0, 2.0};
}

/// Ahlfors case: n x n grid on a square of side `scale` (default 3) with
/// mu = nu uniform and m = 2.
inline Example uniform_grid(const ExampleParams& p) {
  if (p.n < 2) throw Error(ErrorCode::InvalidInput, "uniform_grid needs n >= 2");
  const double side = p.scale > 0.0 ? p.scale : 3.0;
  const auto coords = detail::square_grid(p.n, side);
  const std::vector<double> w(coords.size(), 1.0 / coords.size());
  auto s = make_euclidean_space(coords, w, w);
  s = s.with_omega(detail::with_cover(s, std::vector<char>(coords.size(), 0), 2.0));
  auto k = power_kernel(s, p.kernel_c, 2.0);
  return {"uniform_grid", std::move(s), std::move(k), 2.0, 2.0};
}

inline Example generate_example(const std::string& name, const ExampleParams& p = {}) {
  if (name == "line_in_plane") return line_in_plane(p);
  if (name == "cantor_measure") return cantor_measure(p);
  if (name == "bergman_disc_model") return bergman_disc_model(p);
  if (name == "uniform_grid") return uniform_grid(p);
  throw Error(ErrorCode::UnknownExample, "unknown example '" + name + "'");
}

}  // namespace czkit
