#include "ula/infonce.hpp"

#include <cmath>
#include <stdexcept>

namespace ula {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void require_unit(std::span<const double> v, const char* what) {
  const double n = std::sqrt(dot(v, v));
  if (std::fabs(n - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string(what) +
                                " is not L2-normalized (|v| = " +
                                std::to_string(n) + ")");
  }
}

}  // namespace

InfoNceResult infonce_loss_raw(std::span<const double> q,
                               std::span<const double> k_pos,
                               const Mat& negatives, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
  if (negatives.rows < 1) throw std::invalid_argument("need >= 1 negative");
  if (k_pos.size() != q.size() ||
      negatives.cols != static_cast<int>(q.size())) {
    throw std::invalid_argument("infonce dimension mismatch");
  }
  const int n = negatives.rows;
  const double inv_tau = 1.0 / tau;

  // Similarities: index 0 is the positive.
  std::vector<double> s(n + 1);
  s[0] = dot(q, k_pos) * inv_tau;
  for (int i = 0; i < n; ++i) {
    s[i + 1] = dot(q, {negatives.row(i), q.size()}) * inv_tau;
  }
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : s) {
    v = std::exp(v - mx);
    sum += v;
  }
  InfoNceResult res;
  res.loss = -std::log(s[0] / sum);

  // dL/ds_j = (p_j - 1(j==0)); dq = sum_j dL/ds_j * k_j / tau.
  res.dq.assign(q.size(), 0.0);
  for (int j = 0; j <= n; ++j) {
    const double coeff = (s[j] / sum - (j == 0 ? 1.0 : 0.0)) * inv_tau;
    const double* key = j == 0 ? k_pos.data() : negatives.row(j - 1);
    for (size_t d = 0; d < q.size(); ++d) res.dq[d] += coeff * key[d];
  }
  return res;
}

InfoNceResult infonce_loss(std::span<const double> q,
                           std::span<const double> k_pos, const Mat& negatives,
                           double tau) {
  require_unit(q, "query");
  require_unit(k_pos, "positive key");
  for (int i = 0; i < negatives.rows; ++i) {
    require_unit({negatives.row(i), q.size()}, "negative key");
  }
  return infonce_loss_raw(q, k_pos, negatives, tau);
}

}  // namespace ula
