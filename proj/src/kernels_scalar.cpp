#include <cmath>

#include "ula/kernels.hpp"

// Reference kernels. Plain loops, no reassociation tricks: these define
// the semantics the SIMD variants are tested against.

namespace ula::kernels::scalar {

void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  for (size_t i = 0; i < static_cast<size_t>(m) * n; ++i) c[i] = 0.0;
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<size_t>(p) * m;
    const double* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias_c1;
    const double vhat = v[i] / bias_c2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

}  // namespace ula::kernels::scalar
