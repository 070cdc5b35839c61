#pragma once

#include <span>

#include "ula/common.hpp"

namespace ula {

struct CeResult {
  double loss = 0.0;
  Mat dlogits;  // gradient of the mean loss w.r.t. logits
};

// Mean cross-entropy of softmax(logits + offsets) against integer labels.
// The softmax normalizer uses row-max subtraction; offsets may reach
// log-floor magnitudes (~ -30) without overflow. dlogits is
// (softmax - onehot)/B per row.
//
// Throws std::invalid_argument naming the offending batch row when logits
// or offsets contain non-finite values, and on any shape/label-range
// violation.
CeResult ce_loss_with_offset(const Mat& logits, const Mat& offsets,
                             std::span<const int> labels);

// Row-wise softmax of (logits + offsets), max-subtracted. Rows sum to 1.
Mat softmax_rows(const Mat& logits, const Mat& offsets);

}  // namespace ula
