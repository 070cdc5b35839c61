#pragma once

#include <cstddef>

namespace ula::kernels {

// Compute backends for the data-parallel inner loops. Scalar is the
// reference implementation; Avx2 is an x86 variant using AVX2+FMA
// intrinsics. Dispatch happens once at first use: Auto resolves to the
// widest backend the CPU supports, unless the ULA_KERNELS environment
// variable ("scalar" or "avx2") forces one.
//
// Backends agree to floating-point tolerance, not bit-exactly (FMA and
// vector accumulation reorder the sums); the equivalence suite in
// tests/test_kernels.cpp pins the agreement bound.
enum class Backend { Auto, Scalar, Avx2 };

Backend active_backend();
void set_backend(Backend b);  // throws if the CPU lacks support
const char* backend_name(Backend b);
bool cpu_supports_avx2();

// C[m x n] = A[m x k] * B[k x n]
void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n);
// C[m x n] = A^T * B, with A stored [k x m], B [k x n]
void matmul_tn(double* c, const double* a, const double* b, int m, int k,
               int n);
// C[m x n] = A * B^T, with A stored [m x k], B [n x k]
void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n);

// Decoupled-weight-decay adaptive update, elementwise over n parameters:
//   m <- beta1*m + (1-beta1)*g
//   v <- beta2*v + (1-beta2)*g^2
//   p <- p - lr*( (m/bias_c1) / (sqrt(v/bias_c2) + eps) + wd*p )
// bias_c1 = 1 - beta1^t, bias_c2 = 1 - beta2^t for step t.
void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2);

namespace scalar {
void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n);
void matmul_tn(double* c, const double* a, const double* b, int m, int k,
               int n);
void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n);
void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2);
}  // namespace scalar

namespace avx2 {
void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n);
void matmul_tn(double* c, const double* a, const double* b, int m, int k,
               int n);
void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n);
void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2);
}  // namespace avx2

}  // namespace ula::kernels
