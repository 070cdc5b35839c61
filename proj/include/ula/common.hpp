#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ula {

// Dense row-major matrix of doubles. The numeric core runs in double;
// on-disk formats store float32 (see checkpoint.hpp, dataset.hpp).
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const {
    return data.data() + static_cast<size_t>(i) * cols;
  }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const {
    return data[static_cast<size_t>(i) * cols + j];
  }
  size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double x : data) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }
};

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Lowest-index argmax; ties resolve to the smaller index.
inline int argmax(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("argmax of empty range");
  int best = 0;
  for (int i = 1; i < static_cast<int>(xs.size()); ++i) {
    if (xs[i] > xs[best]) best = i;
  }
  return best;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace ula
