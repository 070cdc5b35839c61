#include "ula/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace ula {

GroupReport group_balanced_accuracy(std::span<const int> preds,
                                    const Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  if (preds.size() != test.size()) {
    throw std::invalid_argument("prediction count does not match test set");
  }
  GroupReport r;
  r.per_group_acc = Mat(test.K, test.L);
  r.counts = Mat(test.K, test.L);
  Mat correct(test.K, test.L);
  size_t hits = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    const int y = test.y[i];
    const int z = test.z[i];
    r.counts.at(y, z) += 1.0;
    const bool ok = preds[i] == y;
    correct.at(y, z) += ok;
    hits += ok;
  }
  r.iid = static_cast<double>(hits) / static_cast<double>(test.size());
  double sum = 0.0;
  int nonempty = 0;
  r.worst = std::numeric_limits<double>::infinity();
  for (int y = 0; y < test.K; ++y) {
    for (int z = 0; z < test.L; ++z) {
      if (r.counts.at(y, z) == 0.0) {
        r.empty_cells.emplace_back(y, z);
        continue;
      }
      const double acc = correct.at(y, z) / r.counts.at(y, z);
      r.per_group_acc.at(y, z) = acc;
      sum += acc;
      nonempty += 1;
      r.worst = std::min(r.worst, acc);
    }
  }
  r.balanced = sum / nonempty;
  return r;
}

GroupReport group_balanced_accuracy(const PredictFn& predict,
                                    const Dataset& test) {
  std::vector<int> preds(test.size());
  for (size_t i = 0; i < test.size(); ++i) preds[i] = predict(test.x(i));
  return group_balanced_accuracy(preds, test);
}

double iid_accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw std::invalid_argument("prediction/label size mismatch");
  }
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

namespace {

struct CellTable {
  std::vector<double> acc;  // per usable cell
  UnsupValStats stats;
};

CellTable unsup_cells(std::span<const int> model_preds,
                      std::span<const int> proxy_preds, const TrainView& valid,
                      const UnsupValOptions& opts) {
  if (valid.size() == 0) throw std::invalid_argument("empty validation set");
  if (model_preds.size() != valid.size() ||
      proxy_preds.size() != valid.size()) {
    throw std::invalid_argument("prediction count does not match valid set");
  }
  const int k = valid.num_classes();
  std::vector<long> count(static_cast<size_t>(k) * k, 0);
  std::vector<long> correct(static_cast<size_t>(k) * k, 0);
  for (size_t i = 0; i < valid.size(); ++i) {
    const int y = valid.label(i);
    const int yb = proxy_preds[i];
    if (yb < 0 || yb >= k) {
      throw std::invalid_argument("proxy prediction out of range");
    }
    const size_t cell = static_cast<size_t>(y) * k + yb;
    count[cell] += 1;
    correct[cell] += model_preds[i] == y;
  }
  CellTable t;
  for (size_t cell = 0; cell < count.size(); ++cell) {
    if (count[cell] == 0) continue;
    if (count[cell] < opts.min_count) {
      t.stats.excluded_cells += 1;
      continue;
    }
    t.acc.push_back(static_cast<double>(correct[cell]) /
                    static_cast<double>(count[cell]));
  }
  t.stats.used_cells = static_cast<int>(t.acc.size());
  t.stats.degenerate = t.stats.used_cells < 2;
  if (t.acc.empty()) {
    throw std::invalid_argument(
        "min_count excluded every populated validation cell");
  }
  return t;
}

}  // namespace

double unsupervised_balanced_val(std::span<const int> model_preds,
                                 std::span<const int> proxy_preds,
                                 const TrainView& valid,
                                 const UnsupValOptions& opts,
                                 UnsupValStats* stats) {
  auto t = unsup_cells(model_preds, proxy_preds, valid, opts);
  if (stats != nullptr) *stats = t.stats;
  double sum = 0.0;
  for (double a : t.acc) sum += a;
  return sum / static_cast<double>(t.acc.size());
}

double unsupervised_worst_group_val(std::span<const int> model_preds,
                                    std::span<const int> proxy_preds,
                                    const TrainView& valid,
                                    const UnsupValOptions& opts,
                                    UnsupValStats* stats) {
  auto t = unsup_cells(model_preds, proxy_preds, valid, opts);
  if (stats != nullptr) *stats = t.stats;
  double worst = t.acc.front();
  for (double a : t.acc) worst = std::min(worst, a);
  return worst;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("pearson: size mismatch");
  }
  if (xs.size() < 3) {
    throw std::invalid_argument("pearson: need at least 3 points");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("pearson: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

void write_group_report_csv(const GroupReport& report,
                            const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open report for write: " + path);
  out << "y,z,count,accuracy\n";
  for (int y = 0; y < report.counts.rows; ++y) {
    for (int z = 0; z < report.counts.cols; ++z) {
      out << y << ',' << z << ',' << static_cast<long>(report.counts.at(y, z))
          << ',' << report.per_group_acc.at(y, z) << '\n';
    }
  }
  out << "summary,balanced=" << report.balanced << ",worst=" << report.worst
      << ",iid=" << report.iid << '\n';
}

}  // namespace ula
