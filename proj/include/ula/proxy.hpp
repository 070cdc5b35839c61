#pragma once

#include <string>
#include <vector>

#include "ula/dataset.hpp"
#include "ula/mlp.hpp"
#include "ula/pretrain.hpp"

namespace ula {

// Bias proxy h_bias: a frozen encoder composed with a linear head trained
// on target labels, plus a post-hoc calibration temperature. Immutable
// after construction; safe for concurrent read-only scoring.
struct BiasProxy {
  MlpModel encoder;  // frozen
  MlpModel head;     // feature_dim -> K, linear
  double tau = 1.0;  // > 0; applied post-hoc, never during probe training
  long t_stop = 0;
  std::string encoder_ref;  // checkpoint path/id for the manifest

  int num_classes() const { return head.output_dim(); }

  Mat logits(const Mat& inputs) const;  // raw head logits, batched
  Mat logits_view(const TrainView& view) const;
};

// Trains only the head on frozen-encoder features (encoded once).
// t_stop = 0 returns the seeded random head untouched.
BiasProxy train_probe(const MlpModel& encoder, const TrainView& train,
                      const ProbeBudget& t_stop, const OptimConfig& optim,
                      int batch, uint64_t seed);

// softmax(h_bias(x) / tau); sums to 1.
std::vector<double> calibrated_conditional(const BiasProxy& p,
                                           std::span<const float> x);

// argmax of the head logits (tau-independent); lowest index wins ties.
int proxy_predict(const BiasProxy& p, std::span<const float> x);
std::vector<int> proxy_predict_view(const BiasProxy& p, const TrainView& view);

// Soft confusion matrix over the training set:
//   joint[y][y_bias] = (1/|D|) sum_{(x',y') in D} p_bias(y_bias|x') 1(y==y')
// Uses only (x, y).
Mat soft_confusion(const BiasProxy& p, const TrainView& train);

// Hard-prediction variant (the tau -> 0 limit): one-hot argmax instead of
// the calibrated conditional. Equals the normalized count confusion matrix.
Mat hard_confusion(const BiasProxy& p, const TrainView& train);

// Column-normalized conditional with Dirichlet smoothing:
//   cond[y][yb] = (joint[y][yb] + alpha) / (colsum(yb) + K * alpha).
// alpha = 0 with an all-zero column is an error instructing alpha > 0.
Mat conditional_from_joint(const Mat& joint, double alpha);

struct JointEstimate {
  Mat joint;        // K x K, sums to 1
  Mat conditional;  // K x K, columns sum to 1
  double alpha = 0.0;
};

// Default smoothing 1/(K * |D|) when alpha < 0.
JointEstimate make_joint_estimate(const BiasProxy& p, const TrainView& train,
                                  double alpha = -1.0);

// Proxy artifact: head checkpoint next to a JSON manifest recording the
// encoder reference, tau and t_stop.
void save_proxy(const BiasProxy& p, const std::string& dir);
BiasProxy load_proxy(const std::string& dir);

}  // namespace ula
