#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ula/dataset.hpp"
#include "ula/mlp.hpp"
#include "ula/optim.hpp"
#include "ula/proxy.hpp"

namespace ula {

enum class AdjustMode { Erm, Sla, Ula };

AdjustMode adjust_mode_from_name(const std::string& name);
const char* adjust_mode_name(AdjustMode m);

struct AdjustSpec {
  AdjustMode mode = AdjustMode::Erm;
  double eta = 0.0;          // adjustment strength; 0 is exactly ERM
  double log_floor = -30.0;  // clamp for log of (near-)zero estimates
};

// offset_y = max(log p(y|z), log_floor) for the true bias value z.
std::vector<double> sla_offsets(const Mat& y_given_z, int z,
                                double log_floor = -30.0);

// offset_y = eta * max(log cond[y][y_bias_hat], log_floor); eta = 0 gives
// the exact zero vector.
std::vector<double> ula_offsets(const JointEstimate& je, int y_bias_hat,
                                double eta, double log_floor = -30.0);

// Per-sample training offsets: sample i uses row col_of[i] of `columns`.
// An empty table means identically zero offsets (ERM).
struct OffsetTable {
  Mat columns;              // n_cols x K
  std::vector<int> col_of;  // one entry per training sample

  bool empty() const { return col_of.empty(); }
};

OffsetTable make_offset_table_ula(const JointEstimate& je,
                                  std::span<const int> proxy_preds, double eta,
                                  double log_floor = -30.0);
// Bias-supervised path: needs the true z labels, so it takes the Dataset.
OffsetTable make_offset_table_sla(const Mat& y_given_z, const Dataset& train,
                                  double eta, double log_floor = -30.0);

// Trainable debiased network: encoder initialized from a checkpoint
// (bit-for-bit) with a freshly seeded linear head stacked on top.
struct DebiasedModel {
  MlpModel net;
  size_t encoder_param_count = 0;
};

DebiasedModel make_debiased(const MlpModel& encoder, int num_classes,
                            uint64_t seed);

// argmax of the raw network logits; offsets are never applied at inference.
int predict_debiased(const DebiasedModel& model, std::span<const float> x);
std::vector<int> predict_debiased_view(const DebiasedModel& model,
                                       const TrainView& view);

// Scores a candidate model's predictions on the validation set; larger is
// better. Predictions are supplied precomputed so one forward pass serves
// both the selection score and the i.i.d. accuracy column.
using Validator =
    std::function<double(std::span<const int> valid_preds)>;

struct EpochRow {
  int epoch = 0;  // 0 is the initialization
  double train_loss = 0.0;
  double val_score = 0.0;
  double iid_val_acc = 0.0;
};

struct FinetuneResult {
  DebiasedModel best;
  int best_epoch = 0;
  double best_score = 0.0;
  std::vector<EpochRow> curve;
  bool failed = false;
  std::string failure;  // diagnostic when failed
};

struct FinetuneConfig {
  OptimConfig optim;
  int batch = 256;
  int max_epochs = 15;
  bool train_encoder = true;  // false: head-only finetuning
  double divergence_loss = 1e3;
};

// Minimizes the offset-adjusted cross-entropy; evaluates the validator on
// the validation view at initialization and after every epoch, and returns
// the checkpoint with the maximum score (earliest epoch wins ties).
// Divergence (non-finite or > divergence_loss train loss) marks the result
// failed instead of throwing.
FinetuneResult finetune(const DebiasedModel& init, const OffsetTable& offsets,
                        const TrainView& train, const TrainView& valid,
                        const Validator& validator, const FinetuneConfig& cfg,
                        uint64_t seed);

void write_curve_csv(const std::vector<EpochRow>& curve,
                     const std::string& path);

}  // namespace ula
