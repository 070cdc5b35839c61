#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ula/augment.hpp"

namespace ula {

struct TaskConfig {
  std::string kind = "colored";  // "colored" | "grid"
  int num_classes = 10;          // K (and L; both tasks use K == L)
  double beta = 0.01;            // colored: bias-conflicting fraction
  int colors_per_shape = 3;      // grid: C
  size_t n_train = 15000;
  size_t n_valid = 3000;
  size_t n_test = 10000;
  double noise = 0.25;
  uint64_t data_seed = 1;
};

struct SslStageConfig {
  int epochs = 24;
  int checkpoint_every = 8;
  int batch = 256;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double temperature = 0.1;
  int proj_dim = 64;
  bool use_momentum_encoder = false;
  double momentum = 0.99;
  int queue_size = 0;
  uint64_t seed = 101;
  AugConfig aug;  // defaults set by default_trial()
};

struct SupervisedStageConfig {
  int epochs = 20;
  int batch = 256;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  uint64_t seed = 202;
};

// One trial of the full pipeline. Serialized verbatim into results.
struct TrialConfig {
  TaskConfig task;
  SslStageConfig ssl;
  SupervisedStageConfig supervised;

  uint64_t seed = 1;  // head init + finetune shuffling
  double lr = 1e-3;
  double weight_decay = 1e-3;
  double eta = 1.0;
  double tau = 1.0;
  int t_ssl = -1;  // SSL checkpoint epoch; -1 means the last one
  long t_stop = 10;
  std::string t_stop_unit = "epochs";  // "epochs" | "steps"
  int batch = 256;
  int max_epochs = 12;
  std::string validator = "balanced";   // Eq.-cell variant for ula
  std::string mode = "ula";             // "erm" | "sla" | "ula"
  std::string init = "ssl";             // "ssl" | "random" | "supervised"
  std::string proxy_source = "ssl";     // "ssl" | "supervised"
  std::string finetune_scope = "full";  // "full" | "head_only"
  double alpha = -1.0;  // Dirichlet smoothing; < 0 means 1/(K*|D|)
  std::vector<int> encoder_hidden = {256, 128};
};

// Task presets used by the CLI and the acceptance suite.
TaskConfig colored_task_default();
TaskConfig grid_task_default();
TrialConfig default_trial(const std::string& task_kind);

void to_json(nlohmann::json& j, const TaskConfig& c);
void from_json(const nlohmann::json& j, TaskConfig& c);
void to_json(nlohmann::json& j, const SslStageConfig& c);
void from_json(const nlohmann::json& j, SslStageConfig& c);
void to_json(nlohmann::json& j, const SupervisedStageConfig& c);
void from_json(const nlohmann::json& j, SupervisedStageConfig& c);
void to_json(nlohmann::json& j, const AugConfig& c);
void from_json(const nlohmann::json& j, AugConfig& c);
void to_json(nlohmann::json& j, const TrialConfig& c);
void from_json(const nlohmann::json& j, TrialConfig& c);

TrialConfig load_trial_config(const std::string& path);

}  // namespace ula
