#pragma once

#include <span>
#include <string>
#include <vector>

#include "ula/common.hpp"
#include "ula/rng.hpp"

namespace ula {

enum class Activation { Relu, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Small feed-forward network with flat parameter storage. Parameters are
// laid out per layer as [W (in x out, row-major), b (out)]; gradients are
// congruent arrays. Backprop is explicit (no autodiff): the model zoo is
// MLPs only and the adjoints are hand-written.
class MlpModel {
 public:
  MlpModel() = default;

  // Zero-initialized parameters.
  static MlpModel zeros(std::vector<int> layer_sizes,
                        std::vector<Activation> activations);

  // He-uniform fan-in init for weights (U(-sqrt(6/fan_in), +sqrt(6/fan_in))),
  // zero biases, for every layer regardless of activation.
  static MlpModel he_uniform(std::vector<int> layer_sizes,
                             std::vector<Activation> activations, Rng& rng);

  struct ForwardCache {
    Mat input;                // batch copy
    std::vector<Mat> pre;     // pre-activation per layer
    std::vector<Mat> post;    // post-activation per layer
  };

  // Returns B x output_dim logits. Throws std::invalid_argument on a
  // dimension mismatch or non-finite batch entries.
  Mat forward(const Mat& batch) const;
  Mat forward(const Mat& batch, ForwardCache& cache) const;

  // dlogits is the loss gradient w.r.t. the final pre-activation output;
  // returns the gradient over the flat parameter array. Requires the cache
  // of a forward pass over the same batch.
  std::vector<double> backward(const ForwardCache& cache,
                               const Mat& dlogits) const;

  int num_layers() const { return static_cast<int>(acts_.size()); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return acts_; }

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  size_t num_params() const { return params_.size(); }

  // Offset of layer l's weight block / bias block in the flat array.
  size_t weight_offset(int layer) const;
  size_t bias_offset(int layer) const;

  // Stacks `head` on top of `this` into one trainable network. Head input
  // dim must equal this->output_dim().
  MlpModel stacked_with(const MlpModel& head) const;

 private:
  MlpModel(std::vector<int> sizes, std::vector<Activation> acts);
  void check_batch(const Mat& batch) const;

  std::vector<int> sizes_;
  std::vector<Activation> acts_;
  std::vector<double> params_;
  std::vector<size_t> w_off_, b_off_;
};

// Per-row argmax with lowest-index tie-break.
std::vector<int> argmax_rows(const Mat& logits);

// Convenience: forward in batches of `batch` rows and take per-row argmax.
std::vector<int> predict_labels(const MlpModel& model, const Mat& inputs,
                                int batch = 512);

}  // namespace ula
