#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ula/common.hpp"
#include "ula/rng.hpp"

namespace ula::test {

// Central finite differences of a scalar function of a flat parameter
// vector. Independent oracle for every analytic gradient in the project.
inline std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f(x);
    x[i] = saved - h;
    const double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1e-8, |a_i|, |b_i|)
inline double max_rel_err(std::span<const double> a,
                          std::span<const double> b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1e-8, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline Mat random_mat(int rows, int cols, Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  Mat m(rows, cols);
  for (double& x : m.data) x = rng.uniform(lo, hi);
  return m;
}

}  // namespace ula::test
