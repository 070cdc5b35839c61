#pragma once

#include <string>
#include <vector>

#include "ula/augment.hpp"
#include "ula/dataset.hpp"
#include "ula/mlp.hpp"
#include "ula/optim.hpp"

namespace ula {

struct SslConfig {
  int proj_dim = 64;         // projector output (and hidden) width
  double temperature = 0.1;  // contrastive temperature
  int epochs = 30;
  int batch = 256;
  int checkpoint_every = 10;  // in epochs
  bool use_momentum_encoder = false;
  double momentum = 0.99;  // EMA coefficient for the key encoder
  int queue_size = 0;      // extra negatives kept from past batches

  void validate() const;
};

struct SslResult {
  std::vector<int> epochs;          // available T_ssl values, ascending
  std::vector<std::string> paths;   // parallel checkpoint files
  std::string index_path;
  double final_loss = 0.0;

  const std::string& path_for(int t_ssl) const;
};

// Contrastive pretraining on unlabeled features: per step, two independent
// augmentations of each batch element form (query, positive key); the
// other in-batch keys (plus the optional queue) are negatives. Keys are
// stop-gradient; with use_momentum_encoder they come from an EMA copy.
// Encoder-only checkpoints (projector discarded) are written to out_dir as
// ssl_epoch_{E}.ck at epoch 0, every checkpoint_every epochs, and at the
// final epoch; index.json lists the available T_ssl values.
//
// Aborts with std::runtime_error if the batch std of encoder outputs stays
// below 1e-4 for 50 consecutive steps (representation collapse).
SslResult pretrain_encoder(const TrainView& train,
                           const std::vector<int>& encoder_sizes,
                           const SslConfig& cfg, const AugConfig& aug,
                           const OptimConfig& optim, uint64_t seed,
                           const std::string& out_dir);

// Batched InfoNCE over row-normalized queries Q (B x d) and keys
// K_all (B + queue x d); key i is query i's positive, every other key is a
// negative. Returns the mean loss and dQ. Matches the per-sample
// infonce_loss contract (stop-gradient keys).
struct BatchNceResult {
  double loss = 0.0;
  Mat dq;
};
BatchNceResult ssl_batch_loss(const Mat& q, const Mat& k_all, double tau);

// Trips after `limit` consecutive steps whose embedding std falls below
// `threshold`.
class CollapseMonitor {
 public:
  explicit CollapseMonitor(double threshold = 1e-4, int limit = 50)
      : threshold_(threshold), limit_(limit) {}
  bool feed(double batch_std) {
    run_ = batch_std < threshold_ ? run_ + 1 : 0;
    return run_ >= limit_;
  }

 private:
  double threshold_;
  int limit_;
  int run_ = 0;
};

// Frozen-encoder feature extraction, batched.
Mat encode_matrix(const MlpModel& encoder, const Mat& inputs, int batch = 512);
Mat encode_view(const MlpModel& encoder, const TrainView& view,
                int batch = 512);

// Short-budget linear softmax head on fixed features (AdamW + cosine).
struct ProbeBudget {
  long amount = 10;
  bool in_steps = false;  // false: epochs, true: optimizer steps
};
MlpModel train_linear_head(const Mat& features, std::span<const int> labels,
                           int num_classes, const ProbeBudget& budget,
                           const OptimConfig& optim, int batch, uint64_t seed);

// i.i.d. validation accuracy of a short-budget linear probe on frozen
// encoder features. Used to tune SSL hyperparameters only.
double online_probe_score(const MlpModel& encoder, const TrainView& train,
                          const TrainView& valid, int probe_epochs = 5,
                          uint64_t seed = 0);

}  // namespace ula
