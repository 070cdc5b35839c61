#include "ula/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

// AVX2+FMA variants, 4 doubles per vector. This translation unit is the
// only one compiled with -mavx2 -mfma; callers reach it through the
// runtime dispatcher, which checks CPU support first.

namespace ula::kernels::avx2 {

void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n4; j += 4) _mm256_storeu_pd(crow + j, _mm256_setzero_pd());
    for (int j = n4; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      const double* brow = b + static_cast<size_t>(p) * n;
      int j = 0;
      for (; j + 16 <= n; j += 16) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        __m256d c1 = _mm256_loadu_pd(crow + j + 4);
        __m256d c2 = _mm256_loadu_pd(crow + j + 8);
        __m256d c3 = _mm256_loadu_pd(crow + j + 12);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 4), c1);
        c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 8), c2);
        c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 12), c3);
        _mm256_storeu_pd(crow + j, c0);
        _mm256_storeu_pd(crow + j + 4, c1);
        _mm256_storeu_pd(crow + j + 8, c2);
        _mm256_storeu_pd(crow + j + 12, c3);
      }
      for (; j + 4 <= n; j += 4) {
        __m256d cc = _mm256_loadu_pd(crow + j);
        cc = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cc);
        _mm256_storeu_pd(crow + j, cc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
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
      const __m256d av = _mm256_set1_pd(arow[i]);
      double* crow = c + static_cast<size_t>(i) * n;
      int j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        __m256d c1 = _mm256_loadu_pd(crow + j + 4);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 4), c1);
        _mm256_storeu_pd(crow + j, c0);
        _mm256_storeu_pd(crow + j + 4, c1);
      }
      for (; j + 4 <= n; j += 4) {
        __m256d cc = _mm256_loadu_pd(crow + j);
        cc = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cc);
        _mm256_storeu_pd(crow + j, cc);
      }
      for (; j < n; ++j) crow[j] += arow[i] * brow[j];
    }
  }
}

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      int p = 0;
      for (; p + 8 <= k; p += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p),
                               _mm256_loadu_pd(brow + p), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p + 4),
                               _mm256_loadu_pd(brow + p + 4), acc1);
      }
      for (; p + 4 <= k; p += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p),
                               _mm256_loadu_pd(brow + p), acc0);
      }
      double acc = hsum(_mm256_add_pd(acc0, acc1));
      for (; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vwd = _mm256_set1_pd(wd);
  const __m256d vic1 = _mm256_set1_pd(1.0 / bias_c1);
  const __m256d vic2 = _mm256_set1_pd(1.0 / bias_c2);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(vb1, mv, _mm256_mul_pd(vb1c, gv));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vb2c, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, vic1);
    const __m256d vhat = _mm256_mul_pd(vv, vic2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    __m256d pv = _mm256_loadu_pd(p + i);
    const __m256d upd =
        _mm256_add_pd(_mm256_div_pd(mhat, denom), _mm256_mul_pd(vwd, pv));
    pv = _mm256_fnmadd_pd(vlr, upd, pv);
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * (1.0 / bias_c1);
    const double vhat = v[i] * (1.0 / bias_c2);
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
  }
}

}  // namespace ula::kernels::avx2

#else  // non-x86: the dispatcher never selects Avx2, these stubs only
       // keep the link happy.

namespace ula::kernels::avx2 {

void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  scalar::matmul_nn(c, a, b, m, k, n);
}
void matmul_tn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  scalar::matmul_tn(c, a, b, m, k, n);
}
void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n) {
  scalar::matmul_nt(c, a, b, m, k, n);
}
void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2) {
  scalar::adamw_update(p, m, v, g, n, lr, beta1, beta2, eps, wd, bias_c1,
                       bias_c2);
}

}  // namespace ula::kernels::avx2

#endif
