#include "ula/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace ula {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<ParsedResult> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty results file: " + path);
  }
  std::vector<ParsedResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 23) {
      throw std::runtime_error("malformed results row: " + line);
    }
    ParsedResult r;
    r.trial = std::stoi(f[0]);
    r.status = f[1];
    r.task = f[2];
    r.mode = f[3];
    r.init = f[4];
    r.proxy_source = f[5];
    r.finetune_scope = f[6];
    r.seed = std::stoull(f[7]);
    r.lr = std::stod(f[8]);
    r.weight_decay = std::stod(f[9]);
    r.eta = std::stod(f[10]);
    r.tau = std::stod(f[11]);
    r.t_ssl = std::stoi(f[12]);
    r.t_stop = std::stol(f[13]);
    r.best_val_score = std::stod(f[18]);
    r.test_balanced = std::stod(f[19]);
    r.test_worst = std::stod(f[20]);
    r.test_iid = std::stod(f[21]);
    out.push_back(r);
  }
  return out;
}

namespace {

struct Agg {
  std::vector<double> balanced, worst, iid, val;
};

double mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::optional<double> sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return std::nullopt;
  const double m = mean(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::string fmt_std(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream out;
  out.precision(6);
  out << *v;
  return out.str();
}

}  // namespace

Report make_report(const std::string& results_dir) {
  const auto results = read_results_csv(
      (fs::path(results_dir) / "results.csv").string());

  Report report;
  std::map<std::string, Agg> groups;
  std::map<std::string, ParsedResult> group_id;
  for (const auto& r : results) {
    if (!r.ok()) {
      report.failed_trials += 1;
      continue;
    }
    report.ok_trials += 1;
    const std::string key = r.task + "|" + r.mode + "|" + r.init + "|" +
                            r.proxy_source + "|" + r.finetune_scope;
    auto& agg = groups[key];
    agg.balanced.push_back(r.test_balanced);
    agg.worst.push_back(r.test_worst);
    agg.iid.push_back(r.test_iid);
    agg.val.push_back(r.best_val_score);
    group_id.emplace(key, r);
  }
  if (report.ok_trials == 0) {
    throw std::runtime_error("no ok trials in " + results_dir);
  }

  for (const auto& [key, agg] : groups) {
    const auto& id = group_id.at(key);
    ReportRow row;
    row.task = id.task;
    row.mode = id.mode;
    row.init = id.init;
    row.proxy_source = id.proxy_source;
    row.finetune_scope = id.finetune_scope;
    row.n = static_cast<int>(agg.balanced.size());
    row.balanced_mean = mean(agg.balanced);
    row.worst_mean = mean(agg.worst);
    row.iid_mean = mean(agg.iid);
    row.val_mean = mean(agg.val);
    row.balanced_std = sample_std(agg.balanced);
    row.worst_std = sample_std(agg.worst);
    row.iid_std = sample_std(agg.iid);
    report.rows.push_back(row);
  }

  {
    std::ofstream out(fs::path(results_dir) / "summary.csv", std::ios::trunc);
    out << "task,mode,init,proxy_source,finetune_scope,n,balanced_mean,"
           "balanced_std,worst_mean,worst_std,iid_mean,iid_std,val_mean\n";
    out.precision(10);
    for (const auto& r : report.rows) {
      out << r.task << ',' << r.mode << ',' << r.init << ',' << r.proxy_source
          << ',' << r.finetune_scope << ',' << r.n << ',' << r.balanced_mean
          << ',' << fmt_std(r.balanced_std) << ',' << r.worst_mean << ','
          << fmt_std(r.worst_std) << ',' << r.iid_mean << ','
          << fmt_std(r.iid_std) << ',' << r.val_mean << '\n';
    }
  }
  {
    std::ofstream out(fs::path(results_dir) / "scatter.csv", std::ios::trunc);
    out << "trial,val_score,test_balanced\n";
    out.precision(10);
    for (const auto& r : results) {
      if (!r.ok()) continue;
      out << r.trial << ',' << r.best_val_score << ',' << r.test_balanced
          << '\n';
    }
  }
  {
    std::ofstream out(fs::path(results_dir) / "report.md", std::ios::trunc);
    out << "# Results\n\n";
    out << report.ok_trials << " ok trials, " << report.failed_trials
        << " failed.\n\n";
    out << "| task | mode | init | proxy | scope | n | balanced | worst | "
           "iid |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    out.precision(4);
    for (const auto& r : report.rows) {
      out << "| " << r.task << " | " << r.mode << " | " << r.init << " | "
          << r.proxy_source << " | " << r.finetune_scope << " | " << r.n
          << " | " << 100 * r.balanced_mean;
      if (r.balanced_std) out << " ± " << 100 * *r.balanced_std;
      out << " | " << 100 * r.worst_mean;
      if (r.worst_std) out << " ± " << 100 * *r.worst_std;
      out << " | " << 100 * r.iid_mean;
      if (r.iid_std) out << " ± " << 100 * *r.iid_std;
      out << " |\n";
    }
    out << "\nValidation-vs-test scatter data: scatter.csv\n";
  }
  return report;
}

}  // namespace ula
