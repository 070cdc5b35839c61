#pragma once

#include <span>
#include <vector>

#include "ula/common.hpp"

namespace ula {

struct InfoNceResult {
  double loss = 0.0;
  std::vector<double> dq;  // gradient w.r.t. the query only
};

// Contrastive loss of one query against its positive key and N negatives:
//   -log( exp(q.k+ / tau) / (exp(q.k+ / tau) + sum_i exp(q.k-_i / tau)) ).
// Keys are stop-gradient; dq is the full gradient. Inputs must be
// L2-normalized within 1e-6 (not silently renormalized). negatives is an
// N x dim matrix, N >= 1.
InfoNceResult infonce_loss(std::span<const double> q,
                           std::span<const double> k_pos, const Mat& negatives,
                           double tau);

// Same computation without the normalization precondition; used by the
// finite-difference oracle, which perturbs q off the unit sphere.
InfoNceResult infonce_loss_raw(std::span<const double> q,
                               std::span<const double> k_pos,
                               const Mat& negatives, double tau);

}  // namespace ula
