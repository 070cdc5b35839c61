#include "ula/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ula {

namespace {

void check_inputs(const Mat& logits, const Mat& offsets,
                  std::span<const int> labels, bool need_labels) {
  if (offsets.rows != logits.rows || offsets.cols != logits.cols) {
    throw std::invalid_argument("offsets shape does not match logits");
  }
  if (need_labels && static_cast<int>(labels.size()) != logits.rows) {
    throw std::invalid_argument("label count does not match batch size");
  }
  for (int i = 0; i < logits.rows; ++i) {
    const double* lr = logits.row(i);
    const double* orow = offsets.row(i);
    for (int j = 0; j < logits.cols; ++j) {
      if (!std::isfinite(lr[j])) {
        throw std::invalid_argument("non-finite logit at batch index " +
                                    std::to_string(i));
      }
      if (!std::isfinite(orow[j])) {
        throw std::invalid_argument("non-finite offset at batch index " +
                                    std::to_string(i));
      }
    }
    if (need_labels && (labels[i] < 0 || labels[i] >= logits.cols)) {
      throw std::invalid_argument("label out of range at batch index " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

Mat softmax_rows(const Mat& logits, const Mat& offsets) {
  check_inputs(logits, offsets, {}, false);
  Mat p(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    const double* lr = logits.row(i);
    const double* orow = offsets.row(i);
    double* pr = p.row(i);
    double mx = lr[0] + orow[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, lr[j] + orow[j]);
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) {
      pr[j] = std::exp(lr[j] + orow[j] - mx);
      sum += pr[j];
    }
    for (int j = 0; j < logits.cols; ++j) pr[j] /= sum;
  }
  return p;
}

CeResult ce_loss_with_offset(const Mat& logits, const Mat& offsets,
                             std::span<const int> labels) {
  check_inputs(logits, offsets, labels, true);
  const int b = logits.rows;
  const int k = logits.cols;
  CeResult res;
  res.dlogits = Mat(b, k);
  const double inv_b = 1.0 / b;
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* lr = logits.row(i);
    const double* orow = offsets.row(i);
    double* dr = res.dlogits.row(i);
    double mx = lr[0] + orow[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, lr[j] + orow[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      dr[j] = std::exp(lr[j] + orow[j] - mx);
      sum += dr[j];
    }
    const double lse = mx + std::log(sum);
    total += lse - (lr[labels[i]] + orow[labels[i]]);
    for (int j = 0; j < k; ++j) dr[j] = dr[j] / sum * inv_b;
    dr[labels[i]] -= inv_b;
  }
  res.loss = total * inv_b;
  return res;
}

}  // namespace ula
