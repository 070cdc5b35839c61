#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ula/dataset.hpp"

namespace ula {

// Per-group evaluation against the hidden bias attribute. Only code that
// receives a full Dataset (not a TrainView) can produce one of these.
struct GroupReport {
  Mat per_group_acc;  // K x L; 0 for empty cells (listed below)
  Mat counts;         // K x L
  double balanced = 0.0;  // mean accuracy over non-empty cells
  double worst = 0.0;     // min accuracy over non-empty cells
  double iid = 0.0;       // plain accuracy over the whole set
  std::vector<std::pair<int, int>> empty_cells;
};

using PredictFn = std::function<int(std::span<const float>)>;

GroupReport group_balanced_accuracy(std::span<const int> preds,
                                    const Dataset& test);
GroupReport group_balanced_accuracy(const PredictFn& predict,
                                    const Dataset& test);

double iid_accuracy(std::span<const int> preds, std::span<const int> labels);

// Bias-unsupervised validation (balanced / worst variants). The valid set
// is partitioned into cells S[y][y_bias] by true label and bias-proxy
// prediction; per-cell accuracies are averaged (or min-ed) over cells with
// at least min_count samples. Cells below min_count are excluded and
// counted in the stats; by construction the cells cover the whole set, so
// at least one cell is always populated. A single populated cell makes the
// score degenerate, which is flagged in the stats for the caller to log.
struct UnsupValOptions {
  int min_count = 1;
};

struct UnsupValStats {
  int used_cells = 0;
  int excluded_cells = 0;
  bool degenerate = false;  // fewer than two usable cells
};

double unsupervised_balanced_val(std::span<const int> model_preds,
                                 std::span<const int> proxy_preds,
                                 const TrainView& valid,
                                 const UnsupValOptions& opts = {},
                                 UnsupValStats* stats = nullptr);

double unsupervised_worst_group_val(std::span<const int> model_preds,
                                    std::span<const int> proxy_preds,
                                    const TrainView& valid,
                                    const UnsupValOptions& opts = {},
                                    UnsupValStats* stats = nullptr);

// Sample Pearson correlation. Requires >= 3 points and nonzero variance
// on both sides.
double pearson(std::span<const double> xs, std::span<const double> ys);

// GroupReport CSV: one row per (y, z) cell plus a summary row.
void write_group_report_csv(const GroupReport& report,
                            const std::string& path);

}  // namespace ula
