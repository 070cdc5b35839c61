#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ula/common.hpp"

namespace ula {

// Renderer geometry shared by generators and augmentations. Images are
// flattened channel-last: index = (row * W + col) * C + channel.
constexpr int kImageH = 12;
constexpr int kImageW = 12;
constexpr int kImageC = 3;
constexpr int kFeatureDim = kImageH * kImageW * kImageC;

struct Provenance {
  std::string generator;
  uint64_t seed = 0;
  nlohmann::json params;  // beta or C, counts, noise, ...
};

// Full dataset, including the hidden bias attribute z. z exists for
// evaluation and for the bias-supervised (sLA) offset source only;
// training and validation code paths receive a TrainView, which has no
// accessor for z.
struct Dataset {
  int K = 0;
  int L = 0;
  std::string split;  // "train" | "valid" | "test"
  Provenance provenance;
  int dim = 0;
  std::vector<float> features;  // n x dim, values in [0,1]
  std::vector<uint16_t> y;
  std::vector<uint16_t> z;

  size_t size() const { return y.size(); }
  std::span<const float> x(size_t i) const {
    return {features.data() + i * static_cast<size_t>(dim),
            static_cast<size_t>(dim)};
  }
};

// Bias-blind view of a dataset. This is the only sample type the
// training, probing, pretraining and bias-unsupervised validation code
// accepts; the hidden z never crosses this boundary.
class TrainView {
 public:
  TrainView() = default;
  explicit TrainView(const Dataset& d) : d_(&d) {}

  size_t size() const { return d_->size(); }
  int num_classes() const { return d_->K; }
  int dim() const { return d_->dim; }
  std::span<const float> x(size_t i) const { return d_->x(i); }
  int label(size_t i) const { return d_->y[i]; }

 private:
  const Dataset* d_ = nullptr;
};

// Gathers view rows (all if indices empty) into a double matrix for the
// model, plus labels.
Mat gather_features(const TrainView& view, std::span<const size_t> indices);
Mat gather_all_features(const TrainView& view);
std::vector<int> gather_labels(const TrainView& view);

// ULAD dataset file, bit-exact layout:
//   magic "ULAD" | format version u32 LE | header_len u32 LE |
//   header JSON (K, L, split, provenance; notes the z section is
//   evaluation-only) | n u64 LE | D u64 LE | features float32[n*D] LE |
//   y uint16[n] LE | z uint16[n] LE
void write_dataset(const Dataset& d, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace ula
