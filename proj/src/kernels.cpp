#include "ula/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ula::kernels {

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend resolve_from_env() {
  const char* env = std::getenv("ULA_KERNELS");
  if (env == nullptr) return Backend::Auto;
  const std::string v(env);
  if (v == "scalar") return Backend::Scalar;
  if (v == "avx2") return Backend::Avx2;
  throw std::invalid_argument("ULA_KERNELS must be 'scalar' or 'avx2', got '" +
                              v + "'");
}

Backend resolve_initial() {
  Backend b = resolve_from_env();
  if (b == Backend::Auto) {
    b = cpu_supports_avx2() ? Backend::Avx2 : Backend::Scalar;
  }
  if (b == Backend::Avx2 && !cpu_supports_avx2()) {
    throw std::runtime_error("AVX2 kernels requested but CPU lacks AVX2/FMA");
  }
  return b;
}

Backend& backend_slot() {
  static Backend b = resolve_initial();
  return b;
}

}  // namespace

Backend active_backend() { return backend_slot(); }

void set_backend(Backend b) {
  if (b == Backend::Auto) {
    backend_slot() = cpu_supports_avx2() ? Backend::Avx2 : Backend::Scalar;
    return;
  }
  if (b == Backend::Avx2 && !cpu_supports_avx2()) {
    throw std::runtime_error("AVX2 kernels requested but CPU lacks AVX2/FMA");
  }
  backend_slot() = b;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Auto:
      return "auto";
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "?";
}

void matmul_nn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  if (active_backend() == Backend::Avx2) {
    avx2::matmul_nn(c, a, b, m, k, n);
  } else {
    scalar::matmul_nn(c, a, b, m, k, n);
  }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k,
               int n) {
  if (active_backend() == Backend::Avx2) {
    avx2::matmul_tn(c, a, b, m, k, n);
  } else {
    scalar::matmul_tn(c, a, b, m, k, n);
  }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k,
               int n) {
  if (active_backend() == Backend::Avx2) {
    avx2::matmul_nt(c, a, b, m, k, n);
  } else {
    scalar::matmul_nt(c, a, b, m, k, n);
  }
}

void adamw_update(double* p, double* m, double* v, const double* g, size_t n,
                  double lr, double beta1, double beta2, double eps, double wd,
                  double bias_c1, double bias_c2) {
  if (active_backend() == Backend::Avx2) {
    avx2::adamw_update(p, m, v, g, n, lr, beta1, beta2, eps, wd, bias_c1,
                       bias_c2);
  } else {
    scalar::adamw_update(p, m, v, g, n, lr, beta1, beta2, eps, wd, bias_c1,
                         bias_c2);
  }
}

}  // namespace ula::kernels
