// Command-line front end: datagen, pretrain, probe, train, eval, search,
// ablate, report. Configs are JSON (see README); the output root defaults
// to $ULA_OUT_ROOT. Exit code 0 only on full success.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ula/checkpoint.hpp"
#include "ula/config.hpp"
#include "ula/generators.hpp"
#include "ula/metrics.hpp"
#include "ula/pipeline.hpp"
#include "ula/pretrain.hpp"
#include "ula/proxy.hpp"
#include "ula/report.hpp"
#include "ula/search.hpp"

namespace fs = std::filesystem;
using namespace ula;

namespace {

int cmd_datagen(const TaskConfig& task, const std::string& out) {
  fs::create_directories(out);
  if (task.kind == "colored") {
    auto train = gen_colored_patterns(task.num_classes, task.beta,
                                      task.n_train, task.noise,
                                      task.data_seed, "train");
    auto valid = gen_colored_patterns(
        task.num_classes, task.beta, task.n_valid, task.noise,
        splitmix64(task.data_seed ^ 0x76616c6964ULL), "valid");
    const double beta_uniform =
        static_cast<double>(task.num_classes - 1) / task.num_classes;
    auto test = gen_colored_patterns(
        task.num_classes, beta_uniform, task.n_test, task.noise,
        splitmix64(task.data_seed ^ 0x74657374ULL), "test");
    write_dataset(train, (fs::path(out) / "train.ds").string());
    write_dataset(valid, (fs::path(out) / "valid.ds").string());
    write_dataset(test, (fs::path(out) / "test.ds").string());
  } else if (task.kind == "grid") {
    auto split = gen_systematic_split(task.num_classes, task.num_classes,
                                      task.colors_per_shape, task.n_train,
                                      task.n_valid, task.n_test, task.noise,
                                      task.data_seed);
    write_dataset(split.train, (fs::path(out) / "train.ds").string());
    write_dataset(split.valid, (fs::path(out) / "valid.ds").string());
    write_dataset(split.test, (fs::path(out) / "test.ds").string());
  } else {
    throw std::invalid_argument("unknown task kind '" + task.kind + "'");
  }
  std::cout << "wrote train/valid/test datasets to " << out << "\n";
  return 0;
}

TrialConfig config_from_file_or_default(const std::string& config_path,
                                        const std::string& task_kind) {
  if (!config_path.empty()) return load_trial_config(config_path);
  return default_trial(task_kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale lab for group-robust classification without group "
               "labels"};
  app.require_subcommand(1);

  std::string out_root;
  app.add_option("--out-root", out_root,
                 "output root (default: $ULA_OUT_ROOT or ./ula_out)");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "chatty progress on stderr");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "generate a synthetic task");
  std::string task_kind = "colored";
  TaskConfig task;
  std::string datagen_out = "data";
  datagen->add_option("--task", task_kind, "colored | grid");
  datagen->add_option("--classes", task.num_classes, "number of classes K");
  datagen->add_option("--beta", task.beta, "bias-conflicting fraction");
  datagen->add_option("--colors-per-shape", task.colors_per_shape, "grid C");
  datagen->add_option("--n-train", task.n_train, "training samples");
  datagen->add_option("--n-valid", task.n_valid, "validation samples");
  datagen->add_option("--n-test", task.n_test, "test samples");
  datagen->add_option("--noise", task.noise, "pixel noise amplitude");
  datagen->add_option("--seed", task.data_seed, "generator seed");
  datagen->add_option("--out", datagen_out, "output directory");

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "SSL-pretrain an encoder");
  std::string pre_data, pre_out = "ssl", pre_config;
  pretrain->add_option("--data", pre_data, "ULAD training dataset")->required();
  pretrain->add_option("--out", pre_out, "checkpoint directory");
  pretrain->add_option("--config", pre_config, "trial config JSON");

  // probe
  auto* probe = app.add_subcommand("probe", "train the bias-proxy head");
  std::string probe_data, probe_encoder, probe_out = "proxy", probe_config;
  std::string probe_diag;
  probe->add_option("--data", probe_data, "ULAD training dataset")->required();
  probe->add_option("--encoder", probe_encoder, "encoder checkpoint")
      ->required();
  probe->add_option("--out", probe_out, "proxy directory");
  probe->add_option("--config", probe_config, "trial config JSON");
  probe->add_option("--diag-data", probe_diag,
                    "optional ULAD dataset for probe diagnostics");

  // train
  auto* train = app.add_subcommand("train", "run the full pipeline once");
  std::string train_config, train_name = "trial", train_task = "colored";
  train->add_option("--config", train_config, "trial config JSON");
  train->add_option("--task", train_task, "task preset when no config given");
  train->add_option("--name", train_name, "trial directory name");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_model, eval_data, eval_out = "group_report.csv";
  eval->add_option("--model", eval_model, "model checkpoint")->required();
  eval->add_option("--data", eval_data, "ULAD dataset with hidden z")
      ->required();
  eval->add_option("--out", eval_out, "group report CSV path");

  // search
  auto* search = app.add_subcommand("search", "seeded random hyperparameter "
                                              "search");
  std::string search_config, search_space, search_out = "search",
              search_task = "colored";
  int n_trials = 16, parallelism = 2;
  uint64_t search_seed = 17;
  search->add_option("--config", search_config, "base trial config JSON");
  search->add_option("--task", search_task, "task preset when no config");
  search->add_option("--space", search_space, "search space JSON");
  search->add_option("--trials", n_trials, "number of sampled configs");
  search->add_option("--parallelism", parallelism, "worker threads");
  search->add_option("--seed", search_seed, "sampling seed");
  search->add_option("--out", search_out, "search output directory");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "init/mode/scope ablation grid");
  std::string ablate_config, ablate_out = "ablation", ablate_task = "grid";
  AblationAxes axes;
  int ablate_parallelism = 2;
  ablate->add_option("--config", ablate_config, "base trial config JSON");
  ablate->add_option("--task", ablate_task, "task preset when no config");
  ablate->add_option("--inits", axes.inits, "init values");
  ablate->add_option("--modes", axes.modes, "mode values");
  ablate->add_option("--scopes", axes.scopes, "finetune scopes");
  ablate->add_option("--seeds", axes.seeds, "seeds per combination");
  ablate->add_option("--parallelism", ablate_parallelism, "worker threads");
  ablate->add_option("--out", ablate_out, "ablation output directory");

  // report
  auto* report = app.add_subcommand("report", "summarize a results directory");
  std::string report_dir;
  report->add_option("--results", report_dir, "directory with results.csv")
      ->required();

  CLI11_PARSE(app, argc, argv);

  PipelineEnv env;
  env.out_root = out_root;
  env.verbose = verbose;

  try {
    if (datagen->parsed()) {
      task.kind = task_kind;
      if (task.kind == "grid" && task.num_classes == 10) task.num_classes = 6;
      return cmd_datagen(task, datagen_out);
    }
    if (pretrain->parsed()) {
      TrialConfig cfg = config_from_file_or_default(pre_config, "colored");
      auto train_ds = read_dataset(pre_data);
      TrainView view(train_ds);
      SslConfig scfg;
      scfg.proj_dim = cfg.ssl.proj_dim;
      scfg.temperature = cfg.ssl.temperature;
      scfg.epochs = cfg.ssl.epochs;
      scfg.batch = cfg.ssl.batch;
      scfg.checkpoint_every = cfg.ssl.checkpoint_every;
      scfg.use_momentum_encoder = cfg.ssl.use_momentum_encoder;
      scfg.momentum = cfg.ssl.momentum;
      scfg.queue_size = cfg.ssl.queue_size;
      OptimConfig optim;
      optim.lr = cfg.ssl.lr;
      optim.weight_decay = cfg.ssl.weight_decay;
      std::vector<int> sizes{view.dim()};
      sizes.insert(sizes.end(), cfg.encoder_hidden.begin(),
                   cfg.encoder_hidden.end());
      auto res = pretrain_encoder(view, sizes, scfg, cfg.ssl.aug, optim,
                                  cfg.ssl.seed, pre_out);
      std::cout << "wrote " << res.paths.size() << " checkpoints to "
                << pre_out << " (final loss " << res.final_loss << ")\n";
      return 0;
    }
    if (probe->parsed()) {
      TrialConfig cfg = config_from_file_or_default(probe_config, "colored");
      auto train_ds = read_dataset(probe_data);
      auto encoder = load_checkpoint(probe_encoder).model;
      OptimConfig optim;
      optim.lr = 5e-3;
      optim.weight_decay = cfg.weight_decay;
      ProbeBudget budget;
      budget.amount = cfg.t_stop;
      budget.in_steps = cfg.t_stop_unit == "steps";
      auto p = train_probe(encoder, TrainView(train_ds), budget, optim,
                           cfg.batch,
                           splitmix64(train_ds.provenance.seed ^
                                      fnv1a64("probe")));
      p.tau = cfg.tau;
      p.encoder_ref = probe_encoder;
      save_proxy(p, probe_out);
      std::cout << "wrote bias proxy to " << probe_out << "\n";
      if (!probe_diag.empty()) {
        auto diag = read_dataset(probe_diag);
        auto preds = proxy_predict_view(p, TrainView(diag));
        auto rep = group_balanced_accuracy(preds, diag);
        size_t z_hits = 0;
        for (size_t i = 0; i < diag.size(); ++i) {
          z_hits += preds[i] == diag.z[i];
        }
        std::cout << "probe on " << probe_diag << ": iid " << rep.iid
                  << ", balanced " << rep.balanced << ", z-match "
                  << static_cast<double>(z_hits) / diag.size() << "\n";
      }
      return 0;
    }
    if (train->parsed()) {
      TrialConfig cfg = config_from_file_or_default(train_config, train_task);
      auto result = run_pipeline(cfg, env, train_name);
      std::cout << "status: " << result.status << "\n";
      if (!result.ok()) {
        std::cout << "error: " << result.error << "\n";
        return 1;
      }
      std::cout << "best epoch " << result.best_epoch << ", val score "
                << result.best_val_score << "\n"
                << "test balanced " << result.test_balanced << ", worst "
                << result.test_worst << ", iid " << result.test_iid << "\n"
                << "artifacts: " << result.artifact_dir << "\n";
      return 0;
    }
    if (eval->parsed()) {
      auto ck = load_checkpoint(eval_model);
      auto ds = read_dataset(eval_data);
      auto preds = predict_labels(ck.model, gather_all_features(TrainView(ds)));
      auto report_data = group_balanced_accuracy(preds, ds);
      write_group_report_csv(report_data, eval_out);
      std::cout << "balanced " << report_data.balanced << ", worst "
                << report_data.worst << ", iid " << report_data.iid << " -> "
                << eval_out << "\n";
      return 0;
    }
    if (search->parsed()) {
      TrialConfig cfg = config_from_file_or_default(search_config, search_task);
      SearchSpace space = default_space();
      if (!search_space.empty()) {
        std::ifstream in(search_space);
        if (!in) throw std::runtime_error("cannot open space: " + search_space);
        nlohmann::json j = nlohmann::json::parse(in);
        from_json(j, space);
      }
      auto res = run_search(cfg, space, n_trials, parallelism, env, search_out,
                            search_seed);
      std::cout << "winner: trial " << res.winner << " (val score "
                << res.trials[res.winner].best_val_score << ", balanced test "
                << res.trials[res.winner].test_balanced << ")\n"
                << "results: " << search_out << "/results.csv\n";
      return 0;
    }
    if (ablate->parsed()) {
      TrialConfig cfg = config_from_file_or_default(ablate_config, ablate_task);
      auto results =
          ablation_suite(cfg, axes, env, ablate_out, ablate_parallelism);
      int failed = 0;
      for (const auto& r : results) failed += !r.ok();
      make_report(ablate_out);
      std::cout << results.size() << " runs (" << failed << " failed) -> "
                << ablate_out << "/report.md\n";
      return failed == 0 ? 0 : 1;
    }
    if (report->parsed()) {
      auto rep = make_report(report_dir);
      std::cout << rep.ok_trials << " ok trials across " << rep.rows.size()
                << " method groups -> " << report_dir << "/report.md\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
