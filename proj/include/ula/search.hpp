#pragma once

#include <string>
#include <vector>

#include "ula/pipeline.hpp"

namespace ula {

// Uniform random search space (desk-scaled defaults in default_space()).
struct SearchSpace {
  std::vector<double> lr{1e-4, 5e-4, 1e-3, 2e-3, 5e-3};
  std::vector<double> weight_decay{0.0, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> eta{1.0, 1.25, 1.5, 2.0};
  std::vector<double> tau{0.5, 1.0, 2.0};
  std::vector<int> t_ssl;     // empty: keep the base config's value
  std::vector<long> t_stop;   // empty: keep the base config's value
};

SearchSpace default_space();

void to_json(nlohmann::json& j, const SearchSpace& s);
void from_json(const nlohmann::json& j, SearchSpace& s);

struct SearchResult {
  std::vector<TrialResult> trials;
  int winner = -1;  // index into trials; max val score, earliest on ties
};

// n_trials i.i.d. draws from the space (seeded), run with `parallelism`
// worker threads; per-trial seeds are base.seed + trial index. Failed
// trials are recorded, never dropped; if every trial fails the aggregate
// error throws. Writes results.csv, scatter.csv and curve files under
// out_dir.
SearchResult run_search(const TrialConfig& base, const SearchSpace& space,
                        int n_trials, int parallelism, const PipelineEnv& env,
                        const std::string& out_dir, uint64_t search_seed = 17);

// Cross product of {init} x {mode} x {finetune scope} over shared seeds.
struct AblationAxes {
  std::vector<std::string> inits{"ssl", "random"};
  std::vector<std::string> modes{"erm", "sla", "ula"};
  std::vector<std::string> scopes{"full"};
  int seeds = 3;
};

std::vector<TrialResult> ablation_suite(const TrialConfig& base,
                                        const AblationAxes& axes,
                                        const PipelineEnv& env,
                                        const std::string& out_dir,
                                        int parallelism = 1);

// Fixed results.csv column order shared by search/ablate/report.
extern const char* kResultsHeader;
void write_results_csv(const std::vector<TrialResult>& trials,
                       const std::string& path);
std::string result_csv_row(const TrialResult& r, int index);

}  // namespace ula
