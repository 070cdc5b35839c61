#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ula {

// One results.csv line, parsed back.
struct ParsedResult {
  int trial = 0;
  std::string status, task, mode, init, proxy_source, finetune_scope;
  uint64_t seed = 0;
  double lr = 0, weight_decay = 0, eta = 0, tau = 0;
  int t_ssl = 0;
  long t_stop = 0;
  double best_val_score = 0, test_balanced = 0, test_worst = 0, test_iid = 0;

  bool ok() const { return status == "ok"; }
};

std::vector<ParsedResult> read_results_csv(const std::string& path);

// Mean +- sample std over seeds for one method group.
struct ReportRow {
  std::string task, mode, init, proxy_source, finetune_scope;
  int n = 0;
  double balanced_mean = 0, worst_mean = 0, iid_mean = 0, val_mean = 0;
  std::optional<double> balanced_std, worst_std, iid_std;
};

struct Report {
  std::vector<ReportRow> rows;
  int ok_trials = 0;
  int failed_trials = 0;
};

// Reads <results_dir>/results.csv and writes summary.csv, scatter.csv and
// report.md next to it. Requires at least one ok trial.
Report make_report(const std::string& results_dir);

}  // namespace ula
