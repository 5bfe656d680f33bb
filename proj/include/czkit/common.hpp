#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace czkit {

using Index = std::size_t;

/// Sorted list of point indices.
using PointSet = std::vector<Index>;

/// Real-valued function on the points of a space, aligned with point order.
using FunctionVector = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorCode {
  InvalidInput,
  EmptyRadiusList,
  EmptySet,
  DegenerateScale,
  RootTerminal,
  ZeroMass,
  NonFiniteKernelValue,
  OmegaIsWholeSpace,
  HypothesisViolated,
  NonTransitEntry,
  MultipleParents,
  ClassificationMissing,
  UnknownExample,
  CalibrationExhausted,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::EmptyRadiusList: return "EmptyRadiusList";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::RootTerminal: return "RootTerminal";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::NonFiniteKernelValue: return "NonFiniteKernelValue";
    case ErrorCode::OmegaIsWholeSpace: return "OmegaIsWholeSpace";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::NonTransitEntry: return "NonTransitEntry";
    case ErrorCode::MultipleParents: return "MultipleParents";
    case ErrorCode::ClassificationMissing: return "ClassificationMissing";
    case ErrorCode::UnknownExample: return "UnknownExample";
    case ErrorCode::CalibrationExhausted: return "CalibrationExhausted";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// splitmix64 step; used to derive independent seeds for ensemble members.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0,1) from a 64-bit engine, bit-identical across platforms.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool is_subset(const PointSet& a, const PointSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool intersects(const PointSet& a, const PointSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

}  // namespace czkit
