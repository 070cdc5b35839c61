#include "ula/toy_oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "ula/loss.hpp"
#include "ula/rng.hpp"

namespace ula {

void ToyProblem::validate() const {
  if (num_x <= 0 || K < 2 || L < 2 ||
      p.size() != static_cast<size_t>(num_x) * K * L) {
    throw std::invalid_argument("toy problem dimensions are inconsistent");
  }
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("toy joint has negative mass");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("toy joint is not normalized");
  }
  for (int y = 0; y < K; ++y) {
    for (int z = 0; z < L; ++z) {
      if (cell_mass(y, z) <= 0.0) {
        throw std::invalid_argument("toy joint has an empty (y,z) cell");
      }
    }
  }
}

double ToyProblem::cell_mass(int y, int z) const {
  double s = 0.0;
  for (int x = 0; x < num_x; ++x) s += prob(x, y, z);
  return s;
}

double ToyProblem::cond_x(int x, int y, int z) const {
  return prob(x, y, z) / cell_mass(y, z);
}

double toy_balanced_accuracy(const ToyProblem& toy,
                             std::span<const int> classifier) {
  if (classifier.size() != static_cast<size_t>(toy.num_x)) {
    throw std::invalid_argument("classifier table size mismatch");
  }
  double acc = 0.0;
  for (int y = 0; y < toy.K; ++y) {
    for (int z = 0; z < toy.L; ++z) {
      for (int x = 0; x < toy.num_x; ++x) {
        if (classifier[x] == y) acc += toy.cond_x(x, y, z);
      }
    }
  }
  return acc / (toy.K * toy.L);
}

ToyOracle oracle_bayes_toy(const ToyProblem& toy) {
  toy.validate();
  ToyOracle o;
  o.classifier.resize(toy.num_x);
  for (int x = 0; x < toy.num_x; ++x) {
    int best = 0;
    double best_score = -1.0;
    for (int y = 0; y < toy.K; ++y) {
      double score = 0.0;
      for (int z = 0; z < toy.L; ++z) score += toy.cond_x(x, y, z);
      if (score > best_score) {
        best_score = score;
        best = y;
      }
    }
    o.classifier[x] = best;
  }
  o.balanced_acc = toy_balanced_accuracy(toy, o.classifier);
  return o;
}

Mat toy_conditional_y_given_z(const ToyProblem& toy) {
  Mat cond(toy.K, toy.L);
  for (int z = 0; z < toy.L; ++z) {
    double col = 0.0;
    for (int y = 0; y < toy.K; ++y) col += toy.cell_mass(y, z);
    for (int y = 0; y < toy.K; ++y) cond.at(y, z) = toy.cell_mass(y, z) / col;
  }
  return cond;
}

FactorizedScorer fit_factorized_scorer(const ToyProblem& toy, int iters,
                                       double lr) {
  toy.validate();
  const Mat cond = toy_conditional_y_given_z(toy);

  FactorizedScorer s;
  s.h = Mat(toy.num_x, toy.K);

  // Full-gradient descent on the exact expected adjusted cross-entropy
  // E_{x,y,z} [-log softmax(h(x) + log p(y|z))_y].
  Mat grad(toy.num_x, toy.K);
  std::vector<double> q(toy.K);
  for (int it = 0; it < iters; ++it) {
    grad.fill(0.0);
    for (int x = 0; x < toy.num_x; ++x) {
      for (int z = 0; z < toy.L; ++z) {
        double mx = -1e300;
        for (int y = 0; y < toy.K; ++y) {
          q[y] = s.h.at(x, y) + std::log(cond.at(y, z));
          mx = std::max(mx, q[y]);
        }
        double sum = 0.0;
        for (int y = 0; y < toy.K; ++y) {
          q[y] = std::exp(q[y] - mx);
          sum += q[y];
        }
        double mass_xz = 0.0;  // p(x, z)
        for (int y = 0; y < toy.K; ++y) mass_xz += toy.prob(x, y, z);
        for (int y = 0; y < toy.K; ++y) {
          grad.at(x, y) += mass_xz * q[y] / sum - toy.prob(x, y, z);
        }
      }
    }
    for (size_t i = 0; i < s.h.data.size(); ++i) s.h.data[i] -= lr * grad.data[i];
  }

  // c[x][z] = p(z|x) p(x) / (Z(z,x) p(z)).
  s.c = Mat(toy.num_x, toy.L);
  for (int x = 0; x < toy.num_x; ++x) {
    double px = 0.0;
    for (int y = 0; y < toy.K; ++y) {
      for (int z = 0; z < toy.L; ++z) px += toy.prob(x, y, z);
    }
    for (int z = 0; z < toy.L; ++z) {
      double pxz = 0.0, pz = 0.0;
      for (int y = 0; y < toy.K; ++y) {
        pxz += toy.prob(x, y, z);
        pz += toy.cell_mass(y, z);
      }
      double partition = 0.0;
      for (int y = 0; y < toy.K; ++y) {
        partition += std::exp(s.h.at(x, y)) * cond.at(y, z);
      }
      s.c.at(x, z) = (pxz / px) * px / (partition * pz);
    }
  }
  return s;
}

double toy_multilabel_balanced_accuracy(const ToyProblem& toy,
                                        const FactorizedScorer& scorer) {
  double acc = 0.0;
  for (int x = 0; x < toy.num_x; ++x) {
    // Joint argmax of exp(h) * c via logs; lowest flattened index wins ties.
    int best_y = 0, best_z = 0;
    double best = -1e300;
    for (int y = 0; y < toy.K; ++y) {
      for (int z = 0; z < toy.L; ++z) {
        const double score = scorer.h.at(x, y) + std::log(scorer.c.at(x, z));
        if (score > best) {
          best = score;
          best_y = y;
          best_z = z;
        }
      }
    }
    for (int y = 0; y < toy.K; ++y) {
      for (int z = 0; z < toy.L; ++z) {
        if (y == best_y && z == best_z) acc += toy.cond_x(x, y, z);
      }
    }
  }
  return acc / (toy.K * toy.L);
}

std::vector<int> scorer_y_classifier(const FactorizedScorer& scorer) {
  std::vector<int> table(scorer.h.rows);
  for (int x = 0; x < scorer.h.rows; ++x) {
    table[x] = argmax(std::span<const double>(
        scorer.h.row(x), static_cast<size_t>(scorer.h.cols)));
  }
  return table;
}

Dataset sample_toy(const ToyProblem& toy, size_t n, uint64_t seed,
                   const std::string& split) {
  toy.validate();
  Dataset d;
  d.K = toy.K;
  d.L = toy.L;
  d.split = split;
  d.dim = toy.num_x;
  d.provenance.generator = "toy-v1";
  d.provenance.seed = seed;
  d.provenance.params = {{"num_x", toy.num_x}, {"n", n}};
  d.features.assign(n * static_cast<size_t>(toy.num_x), 0.0f);
  d.y.resize(n);
  d.z.resize(n);

  Rng rng = Rng(seed).substream("datagen.toy");
  for (size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    size_t flat = 0;
    while (flat + 1 < toy.p.size() && u >= toy.p[flat]) {
      u -= toy.p[flat];
      ++flat;
    }
    const int x = static_cast<int>(flat / (toy.K * toy.L));
    const int y = static_cast<int>((flat / toy.L) % toy.K);
    const int z = static_cast<int>(flat % toy.L);
    d.features[i * toy.num_x + x] = 1.0f;
    d.y[i] = static_cast<uint16_t>(y);
    d.z[i] = static_cast<uint16_t>(z);
  }
  return d;
}

}  // namespace ula
