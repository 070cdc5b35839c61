#pragma once

#include <functional>
#include <string>

#include "json.hpp"
#include "ula/adjust.hpp"
#include "ula/config.hpp"

namespace ula {

struct PipelineEnv {
  std::string out_root;  // empty: $ULA_OUT_ROOT, else "./ula_out"
  bool verbose = false;

  std::string resolved_root() const;
};

struct TrialResult {
  nlohmann::json config;  // the TrialConfig, verbatim
  std::string status = "ok";  // "ok" | "failed"
  std::string error;
  double best_val_score = 0.0;
  int best_epoch = 0;
  double test_balanced = 0.0;
  double test_worst = 0.0;
  double test_iid = 0.0;
  double wall_seconds = 0.0;
  std::string artifact_dir;

  bool ok() const { return status == "ok"; }
};

// Content-addressed stage artifacts under <root>/cache. ensure() builds a
// stage into a temporary directory and atomically renames it into place;
// concurrent calls for the same key serialize on a per-key mutex.
class StageCache {
 public:
  explicit StageCache(std::string root);
  std::string ensure(const std::string& stage, const nlohmann::json& inputs,
                     const std::function<void(const std::string& dir)>& build);
  static std::string key_of(const std::string& stage,
                            const nlohmann::json& inputs);

 private:
  std::string root_;
};

// Datagen -> (SSL pretrain | supervised pretrain) -> probe -> confusion ->
// finetune with per-epoch validation -> test evaluation. Stages are cached
// by content key; a failing stage names itself in the thrown error, and a
// diverging finetune yields status = "failed" instead of a throw.
TrialResult run_pipeline(const TrialConfig& cfg, const PipelineEnv& env,
                         const std::string& trial_name = "");

// Loaded dataset bundle (cached on disk in ULAD files).
struct TaskData {
  Dataset train;
  Dataset valid;
  Dataset test;
};
TaskData load_task_data(const TaskConfig& task, const PipelineEnv& env);

// Stage keys (exposed for cache-behavior tests).
nlohmann::json datagen_inputs(const TaskConfig& task);
nlohmann::json ssl_inputs(const TaskConfig& task, const SslStageConfig& ssl,
                          const std::vector<int>& encoder_hidden);

}  // namespace ula
