#pragma once

#include <span>
#include <vector>

#include "ula/dataset.hpp"

namespace ula {

// Fully enumerable joint p(x, y, z) over a finite input alphabet. Used by
// brute-force oracles; all (y, z) cells must carry positive mass so the
// balanced test distribution is well defined.
struct ToyProblem {
  int num_x = 0;
  int K = 0;
  int L = 0;
  std::vector<double> p;  // [x][y][z], row-major

  double prob(int x, int y, int z) const {
    return p[(static_cast<size_t>(x) * K + y) * L + z];
  }
  double& prob(int x, int y, int z) {
    return p[(static_cast<size_t>(x) * K + y) * L + z];
  }

  // Throws std::invalid_argument unless the table is a distribution
  // (within 1e-12) with positive mass in every (y,z) cell.
  void validate() const;

  double cell_mass(int y, int z) const;     // p(y, z)
  double cond_x(int x, int y, int z) const;  // p(x | y, z)
};

// Balanced accuracy of a deterministic classifier table under the uniform
// group test distribution, computed exactly.
double toy_balanced_accuracy(const ToyProblem& toy,
                             std::span<const int> classifier);

// Balanced-optimal classifier: per x, argmax_y of the balanced posterior
// sum_z p(x|y,z). The objective decomposes per input value, so the per-x
// argmax attains the maximum over all K^num_x classifier tables.
struct ToyOracle {
  std::vector<int> classifier;
  double balanced_acc = 0.0;
};
ToyOracle oracle_bayes_toy(const ToyProblem& toy);

// Exact conditional p(y | z), K x L.
Mat toy_conditional_y_given_z(const ToyProblem& toy);

// Factorized multi-label scorer F(x)_{y,z} = exp(h[x][y]) * c[x][z]:
// h is fitted on the exact expected cross-entropy of the logit-adjusted
// model softmax(h(x) + log p(y|z)) by full-gradient descent, and
// c[x][z] = p(z|x) p(x) / (Z(z,x) p(z)) with Z the adjusted-model
// normalizer. All quantities come from the exact toy joint.
struct FactorizedScorer {
  Mat h;  // num_x x K
  Mat c;  // num_x x L, positive
};
FactorizedScorer fit_factorized_scorer(const ToyProblem& toy, int iters = 4000,
                                       double lr = 0.5);

// Exact multi-label balanced accuracy of the scorer's joint argmax over
// (y, z).
double toy_multilabel_balanced_accuracy(const ToyProblem& toy,
                                        const FactorizedScorer& scorer);

// y-part classifier table of the scorer (argmax_y h[x][y]).
std::vector<int> scorer_y_classifier(const FactorizedScorer& scorer);

// i.i.d. samples from the toy joint; x is one-hot encoded so a single
// linear layer can represent any classifier table.
Dataset sample_toy(const ToyProblem& toy, size_t n, uint64_t seed,
                   const std::string& split = "train");

}  // namespace ula
