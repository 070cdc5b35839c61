#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "ula/kernels.hpp"
#include "ula/rng.hpp"

using namespace ula;
namespace k = ula::kernels;

namespace {

// Agreement bound between backends: accumulation order differs, so allow
// k * eps-scale slack relative to the row magnitude.
constexpr double kTol = 1e-11;

void check_close(std::span<const double> a, std::span<const double> b,
                 double tol) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    REQUIRE(std::fabs(a[i] - b[i]) / scale <= tol);
  }
}

}  // namespace

TEST_CASE("scalar matmul_nn matches a hand example") {
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{5, 6, 7, 8};
  std::vector<double> c(4);
  k::scalar::matmul_nn(c.data(), a.data(), b.data(), 2, 2, 2);
  CHECK(c[0] == doctest::Approx(19));
  CHECK(c[1] == doctest::Approx(22));
  CHECK(c[2] == doctest::Approx(43));
  CHECK(c[3] == doctest::Approx(50));
}

TEST_CASE("transpose variants agree with explicit transposition") {
  Rng rng(11);
  const int m = 7, kk = 13, n = 9;
  auto a = test::random_mat(kk, m, rng);   // for tn: A is k x m
  auto b = test::random_mat(kk, n, rng);  // B is k x n
  std::vector<double> c_tn(static_cast<size_t>(m) * n);
  k::scalar::matmul_tn(c_tn.data(), a.data.data(), b.data.data(), m, kk, n);

  // Reference: transpose A explicitly then nn.
  Mat at(m, kk);
  for (int i = 0; i < kk; ++i)
    for (int j = 0; j < m; ++j) at.at(j, i) = a.at(i, j);
  std::vector<double> c_ref(static_cast<size_t>(m) * n);
  k::scalar::matmul_nn(c_ref.data(), at.data.data(), b.data.data(), m, kk, n);
  check_close(c_tn, c_ref, 1e-13);

  auto x = test::random_mat(m, kk, rng);
  auto y = test::random_mat(n, kk, rng);  // for nt: B is n x k
  std::vector<double> c_nt(static_cast<size_t>(m) * n);
  k::scalar::matmul_nt(c_nt.data(), x.data.data(), y.data.data(), m, kk, n);
  Mat yt(kk, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < kk; ++j) yt.at(j, i) = y.at(i, j);
  std::vector<double> c_ref2(static_cast<size_t>(m) * n);
  k::scalar::matmul_nn(c_ref2.data(), x.data.data(), yt.data.data(), m, kk, n);
  check_close(c_nt, c_ref2, 1e-13);
}

TEST_CASE("avx2 kernels are equivalent to scalar reference") {
  if (!k::cpu_supports_avx2()) {
    MESSAGE("CPU lacks AVX2; equivalence suite skipped");
    return;
  }
  Rng rng(42);
  // Shapes chosen to hit remainders: n % 16, n % 4, k % 8 all nonzero.
  const int shapes[][3] = {{1, 1, 1},   {2, 3, 5},    {16, 32, 10},
                           {33, 17, 29}, {64, 432, 256}, {5, 130, 7}};
  for (auto& s : shapes) {
    const int m = s[0], kk = s[1], n = s[2];
    auto a = test::random_mat(m, kk, rng);
    auto b = test::random_mat(kk, n, rng);
    std::vector<double> c0(static_cast<size_t>(m) * n), c1(c0.size());
    k::scalar::matmul_nn(c0.data(), a.data.data(), b.data.data(), m, kk, n);
    k::avx2::matmul_nn(c1.data(), a.data.data(), b.data.data(), m, kk, n);
    check_close(c0, c1, kTol);

    auto a2 = test::random_mat(kk, m, rng);
    k::scalar::matmul_tn(c0.data(), a2.data.data(), b.data.data(), m, kk, n);
    k::avx2::matmul_tn(c1.data(), a2.data.data(), b.data.data(), m, kk, n);
    check_close(c0, c1, kTol);

    auto b2 = test::random_mat(n, kk, rng);
    k::scalar::matmul_nt(c0.data(), a.data.data(), b2.data.data(), m, kk, n);
    k::avx2::matmul_nt(c1.data(), a.data.data(), b2.data.data(), m, kk, n);
    check_close(c0, c1, kTol);
  }
}

TEST_CASE("adamw_update backends agree and implement the decoupled rule") {
  Rng rng(7);
  const size_t n = 1037;
  std::vector<double> p0(n), m0(n, 0.0), v0(n, 0.0), g(n);
  for (auto& x : p0) x = rng.uniform(-1, 1);
  for (auto& x : g) x = rng.uniform(-1, 1);
  auto p1 = p0, m1 = m0, v1 = v0;

  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  const double c1 = 1.0 - b1, c2 = 1.0 - b2;  // step 1
  k::scalar::adamw_update(p0.data(), m0.data(), v0.data(), g.data(), n, lr, b1,
                          b2, eps, wd, c1, c2);
  if (k::cpu_supports_avx2()) {
    k::avx2::adamw_update(p1.data(), m1.data(), v1.data(), g.data(), n, lr, b1,
                          b2, eps, wd, c1, c2);
    check_close(p0, p1, kTol);
    check_close(m0, m1, kTol);
    check_close(v0, v1, kTol);
  }

  // One-step closed form: p -= lr * (g/(|g| + eps) + wd * p_old) after bias
  // correction collapses m-hat to g and v-hat to g^2.
  std::vector<double> p2{0.5}, m2{0.0}, v2{0.0}, g2{2.0};
  k::scalar::adamw_update(p2.data(), m2.data(), v2.data(), g2.data(), 1, lr,
                          b1, b2, eps, wd, c1, c2);
  const double expect = 0.5 - lr * (2.0 / (2.0 + eps) + wd * 0.5);
  CHECK(p2[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("backend dispatch can be forced") {
  const auto saved = k::active_backend();
  k::set_backend(k::Backend::Scalar);
  CHECK(k::active_backend() == k::Backend::Scalar);
  if (k::cpu_supports_avx2()) {
    k::set_backend(k::Backend::Avx2);
    CHECK(k::active_backend() == k::Backend::Avx2);
  }
  k::set_backend(saved);
}
