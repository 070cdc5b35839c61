#include "ula/search.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace ula {

SearchSpace default_space() { return SearchSpace{}; }

void to_json(nlohmann::json& j, const SearchSpace& s) {
  j = {{"lr", s.lr},
       {"weight_decay", s.weight_decay},
       {"eta", s.eta},
       {"tau", s.tau},
       {"t_ssl", s.t_ssl},
       {"t_stop", s.t_stop}};
}

void from_json(const nlohmann::json& j, SearchSpace& s) {
  s.lr = j.value("lr", s.lr);
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.eta = j.value("eta", s.eta);
  s.tau = j.value("tau", s.tau);
  s.t_ssl = j.value("t_ssl", s.t_ssl);
  s.t_stop = j.value("t_stop", s.t_stop);
}

const char* kResultsHeader =
    "trial,status,task,mode,init,proxy_source,finetune_scope,seed,lr,"
    "weight_decay,eta,tau,t_ssl,t_stop,batch,max_epochs,validator,best_epoch,"
    "best_val_score,test_balanced,test_worst,test_iid,wall_seconds,error";

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n') c = ';';
  }
  return s;
}

template <typename T>
T pick(Rng& rng, const std::vector<T>& xs, T fallback) {
  if (xs.empty()) return fallback;
  return xs[rng.uniform_below(xs.size())];
}

std::vector<TrialResult> run_parallel(
    const std::vector<std::pair<std::string, TrialConfig>>& jobs,
    int parallelism, const PipelineEnv& env) {
  std::vector<TrialResult> results(jobs.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = run_pipeline(jobs[i].second, env, jobs[i].first);
      } catch (const std::exception& e) {
        results[i].config = jobs[i].second;
        results[i].status = "failed";
        results[i].error = e.what();
      }
    }
  };
  const int workers =
      std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace

std::string result_csv_row(const TrialResult& r, int index) {
  const TrialConfig cfg = r.config.get<TrialConfig>();
  std::ostringstream out;
  out.precision(10);
  out << index << ',' << r.status << ',' << cfg.task.kind << ',' << cfg.mode
      << ',' << cfg.init << ',' << cfg.proxy_source << ','
      << cfg.finetune_scope << ',' << cfg.seed << ',' << cfg.lr << ','
      << cfg.weight_decay << ',' << cfg.eta << ',' << cfg.tau << ','
      << cfg.t_ssl << ',' << cfg.t_stop << ',' << cfg.batch << ','
      << cfg.max_epochs << ',' << cfg.validator << ',' << r.best_epoch << ','
      << r.best_val_score << ',' << r.test_balanced << ',' << r.test_worst
      << ',' << r.test_iid << ',' << r.wall_seconds << ','
      << sanitize(r.error);
  return out.str();
}

void write_results_csv(const std::vector<TrialResult>& trials,
                       const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open results for write: " + path);
  out << kResultsHeader << '\n';
  for (size_t i = 0; i < trials.size(); ++i) {
    out << result_csv_row(trials[i], static_cast<int>(i)) << '\n';
  }
}

SearchResult run_search(const TrialConfig& base, const SearchSpace& space,
                        int n_trials, int parallelism, const PipelineEnv& env,
                        const std::string& out_dir, uint64_t search_seed) {
  if (n_trials < 1) throw std::invalid_argument("need at least one trial");
  fs::create_directories(out_dir);

  Rng rng = Rng(search_seed).substream("search.sample");
  std::vector<std::pair<std::string, TrialConfig>> jobs;
  for (int i = 0; i < n_trials; ++i) {
    TrialConfig cfg = base;
    cfg.lr = pick(rng, space.lr, base.lr);
    cfg.weight_decay = pick(rng, space.weight_decay, base.weight_decay);
    cfg.eta = pick(rng, space.eta, base.eta);
    cfg.tau = pick(rng, space.tau, base.tau);
    cfg.t_ssl = pick(rng, space.t_ssl, base.t_ssl);
    cfg.t_stop = pick(rng, space.t_stop, base.t_stop);
    cfg.seed = base.seed + static_cast<uint64_t>(i);
    jobs.emplace_back("search_trial_" + std::to_string(i), cfg);
  }

  SearchResult res;
  res.trials = run_parallel(jobs, parallelism, env);

  int ok_count = 0;
  for (size_t i = 0; i < res.trials.size(); ++i) {
    const auto& t = res.trials[i];
    if (!t.ok()) continue;
    ok_count += 1;
    if (res.winner < 0 ||
        t.best_val_score > res.trials[res.winner].best_val_score) {
      res.winner = static_cast<int>(i);  // strict >: earliest index on ties
    }
  }
  if (ok_count == 0) {
    write_results_csv(res.trials, (fs::path(out_dir) / "results.csv").string());
    throw std::runtime_error("all " + std::to_string(n_trials) +
                             " search trials failed");
  }

  write_results_csv(res.trials, (fs::path(out_dir) / "results.csv").string());
  {
    std::ofstream scatter(fs::path(out_dir) / "scatter.csv", std::ios::trunc);
    scatter << "trial,val_score,test_balanced\n";
    for (size_t i = 0; i < res.trials.size(); ++i) {
      if (!res.trials[i].ok()) continue;
      scatter << i << ',' << res.trials[i].best_val_score << ','
              << res.trials[i].test_balanced << '\n';
    }
  }
  {
    nlohmann::json meta;
    meta["winner"] = res.winner;
    meta["n_trials"] = n_trials;
    meta["search_seed"] = search_seed;
    meta["space"] = space;
    std::ofstream out(fs::path(out_dir) / "search.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
  }
  return res;
}

std::vector<TrialResult> ablation_suite(const TrialConfig& base,
                                        const AblationAxes& axes,
                                        const PipelineEnv& env,
                                        const std::string& out_dir,
                                        int parallelism) {
  fs::create_directories(out_dir);
  std::vector<std::pair<std::string, TrialConfig>> jobs;
  for (const auto& init : axes.inits) {
    for (const auto& mode : axes.modes) {
      for (const auto& scope : axes.scopes) {
        for (int s = 0; s < axes.seeds; ++s) {
          TrialConfig cfg = base;
          cfg.init = init;
          cfg.mode = mode;
          cfg.finetune_scope = scope;
          cfg.seed = base.seed + static_cast<uint64_t>(s);
          const std::string name = "ablate_" + init + "_" + mode + "_" +
                                   scope + "_s" + std::to_string(s);
          jobs.emplace_back(name, cfg);
        }
      }
    }
  }
  auto results = run_parallel(jobs, parallelism, env);
  write_results_csv(results, (fs::path(out_dir) / "results.csv").string());
  return results;
}

}  // namespace ula
