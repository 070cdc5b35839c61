#include "ula/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>

#include "ula/checkpoint.hpp"
#include "ula/generators.hpp"
#include "ula/metrics.hpp"
#include "ula/pretrain.hpp"

namespace fs = std::filesystem;

namespace ula {

std::string PipelineEnv::resolved_root() const {
  if (!out_root.empty()) return out_root;
  if (const char* env = std::getenv("ULA_OUT_ROOT")) return env;
  return "ula_out";
}

StageCache::StageCache(std::string root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::string StageCache::key_of(const std::string& stage,
                               const nlohmann::json& inputs) {
  const uint64_t h = fnv1a64(stage + "|v1|" + inputs.dump());
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return stage + "-" + buf;
}

namespace {

std::mutex& key_mutex(const std::string& key) {
  static std::mutex registry_lock;
  static std::map<std::string, std::unique_ptr<std::mutex>> registry;
  std::lock_guard<std::mutex> g(registry_lock);
  auto& slot = registry[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

}  // namespace

std::string StageCache::ensure(
    const std::string& stage, const nlohmann::json& inputs,
    const std::function<void(const std::string& dir)>& build) {
  const std::string key = key_of(stage, inputs);
  const fs::path final_dir = fs::path(root_) / key;
  const fs::path marker = final_dir / "stage.json";

  std::lock_guard<std::mutex> g(key_mutex(key));
  if (fs::exists(marker)) return final_dir.string();

  const fs::path tmp = fs::path(root_) / (key + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  build(tmp.string());
  {
    nlohmann::json meta;
    meta["stage"] = stage;
    meta["inputs"] = inputs;
    std::ofstream out(tmp / "stage.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
  }
  fs::remove_all(final_dir);
  fs::rename(tmp, final_dir);
  return final_dir.string();
}

nlohmann::json datagen_inputs(const TaskConfig& task) {
  nlohmann::json j = task;
  j["generator_version"] = 3;  // renderer revision invalidates the cache
  return j;
}

nlohmann::json ssl_inputs(const TaskConfig& task, const SslStageConfig& ssl,
                          const std::vector<int>& encoder_hidden) {
  nlohmann::json j;
  j["datagen"] = datagen_inputs(task);
  j["ssl"] = ssl;
  j["encoder_hidden"] = encoder_hidden;
  return j;
}

namespace {

std::vector<int> encoder_sizes(const TrialConfig& cfg) {
  std::vector<int> sizes{kFeatureDim};
  sizes.insert(sizes.end(), cfg.encoder_hidden.begin(),
               cfg.encoder_hidden.end());
  return sizes;
}

void build_datagen(const TaskConfig& task, const std::string& dir) {
  if (task.kind == "colored") {
    auto train = gen_colored_patterns(task.num_classes, task.beta,
                                      task.n_train, task.noise,
                                      task.data_seed, "train");
    auto valid = gen_colored_patterns(
        task.num_classes, task.beta, task.n_valid, task.noise,
        splitmix64(task.data_seed ^ 0x76616c6964ULL), "valid");
    // Uniform group test distribution: beta at the (K-1)/K point.
    const double beta_uniform =
        static_cast<double>(task.num_classes - 1) / task.num_classes;
    auto test = gen_colored_patterns(
        task.num_classes, beta_uniform, task.n_test, task.noise,
        splitmix64(task.data_seed ^ 0x74657374ULL), "test");
    write_dataset(train, (fs::path(dir) / "train.ds").string());
    write_dataset(valid, (fs::path(dir) / "valid.ds").string());
    write_dataset(test, (fs::path(dir) / "test.ds").string());
  } else if (task.kind == "grid") {
    auto split = gen_systematic_split(task.num_classes, task.num_classes,
                                      task.colors_per_shape, task.n_train,
                                      task.n_valid, task.n_test, task.noise,
                                      task.data_seed);
    write_dataset(split.train, (fs::path(dir) / "train.ds").string());
    write_dataset(split.valid, (fs::path(dir) / "valid.ds").string());
    write_dataset(split.test, (fs::path(dir) / "test.ds").string());
  } else {
    throw std::invalid_argument("unknown task kind '" + task.kind + "'");
  }
}

struct SupArtifacts {
  MlpModel encoder;
  MlpModel head;
};

// End-to-end supervised pretraining (encoder + linear head, plain CE).
// The last epoch is kept: the point of this baseline is a network that
// fits the training set as far as its budget allows.
SupArtifacts train_supervised(const TrialConfig& cfg, const TaskData& data) {
  Rng rng = Rng(cfg.supervised.seed).substream("sup.init");
  auto sizes = encoder_sizes(cfg);
  std::vector<Activation> acts(sizes.size() - 1, Activation::Relu);
  acts.back() = Activation::Identity;
  MlpModel encoder = MlpModel::he_uniform(sizes, acts, rng);
  auto model = make_debiased(encoder, cfg.task.num_classes,
                             cfg.supervised.seed);

  int calls = 0;
  Validator last_epoch_wins = [&](std::span<const int>) {
    return static_cast<double>(calls++);
  };
  FinetuneConfig fcfg;
  fcfg.optim.lr = cfg.supervised.lr;
  fcfg.optim.weight_decay = cfg.supervised.weight_decay;
  fcfg.batch = cfg.supervised.batch;
  fcfg.max_epochs = cfg.supervised.epochs;
  auto res = finetune(model, OffsetTable{}, TrainView(data.train),
                      TrainView(data.valid), last_epoch_wins, fcfg,
                      cfg.supervised.seed);
  if (res.failed) {
    throw std::runtime_error("supervised pretraining failed: " + res.failure);
  }
  SupArtifacts out;
  out.encoder = MlpModel::zeros(sizes, acts);
  std::copy(res.best.net.params().begin(),
            res.best.net.params().begin() +
                static_cast<std::ptrdiff_t>(out.encoder.num_params()),
            out.encoder.mutable_params().begin());
  out.head = MlpModel::zeros({sizes.back(), cfg.task.num_classes},
                             {Activation::Identity});
  std::copy(res.best.net.params().begin() +
                static_cast<std::ptrdiff_t>(out.encoder.num_params()),
            res.best.net.params().end(), out.head.mutable_params().begin());
  return out;
}

ProbeBudget probe_budget(const TrialConfig& cfg) {
  ProbeBudget b;
  b.amount = cfg.t_stop;
  b.in_steps = cfg.t_stop_unit == "steps";
  if (cfg.t_stop_unit != "steps" && cfg.t_stop_unit != "epochs") {
    throw std::invalid_argument("t_stop_unit must be 'steps' or 'epochs'");
  }
  return b;
}

}  // namespace

TaskData load_task_data(const TaskConfig& task, const PipelineEnv& env) {
  StageCache cache((fs::path(env.resolved_root()) / "cache").string());
  const std::string dir = cache.ensure(
      "datagen", datagen_inputs(task),
      [&](const std::string& d) { build_datagen(task, d); });
  TaskData data;
  data.train = read_dataset((fs::path(dir) / "train.ds").string());
  data.valid = read_dataset((fs::path(dir) / "valid.ds").string());
  data.test = read_dataset((fs::path(dir) / "test.ds").string());
  return data;
}

TrialResult run_pipeline(const TrialConfig& cfg, const PipelineEnv& env,
                         const std::string& trial_name) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult result;
  result.config = cfg;

  const std::string root = env.resolved_root();
  StageCache cache((fs::path(root) / "cache").string());
  std::string stage = "datagen";
  try {
    TaskData data = load_task_data(cfg.task, env);
    TrainView train_view(data.train);
    TrainView valid_view(data.valid);
    const int k = data.train.K;

    const bool need_ssl =
        cfg.init == "ssl" ||
        (cfg.mode == "ula" && cfg.proxy_source == "ssl");
    const bool need_sup =
        cfg.init == "supervised" ||
        (cfg.mode == "ula" && cfg.proxy_source == "supervised");

    std::string ssl_dir;
    if (need_ssl) {
      stage = "ssl-pretrain";
      ssl_dir = cache.ensure(
          "ssl", ssl_inputs(cfg.task, cfg.ssl, cfg.encoder_hidden),
          [&](const std::string& d) {
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
            pretrain_encoder(train_view, encoder_sizes(cfg), scfg, cfg.ssl.aug,
                             optim, cfg.ssl.seed, d);
          });
    }

    auto ssl_checkpoint_path = [&](int t_ssl) {
      std::ifstream in(fs::path(ssl_dir) / "index.json");
      nlohmann::json index = nlohmann::json::parse(in);
      auto epochs = index.at("epochs").get<std::vector<int>>();
      int chosen = t_ssl;
      if (chosen < 0) chosen = epochs.back();
      const auto& files = index.at("files");
      const std::string name = std::to_string(chosen);
      if (!files.contains(name)) {
        throw std::invalid_argument("no SSL checkpoint at epoch " + name);
      }
      return (fs::path(ssl_dir) / files.at(name).get<std::string>()).string();
    };

    std::string sup_dir;
    if (need_sup) {
      stage = "supervised-pretrain";
      nlohmann::json sup_in;
      sup_in["datagen"] = datagen_inputs(cfg.task);
      sup_in["supervised"] = cfg.supervised;
      sup_in["encoder_hidden"] = cfg.encoder_hidden;
      sup_dir = cache.ensure("sup", sup_in, [&](const std::string& d) {
        auto art = train_supervised(cfg, data);
        save_checkpoint(art.encoder, cfg.supervised.epochs,
                        (fs::path(d) / "encoder.ck").string());
        save_checkpoint(art.head, cfg.supervised.epochs,
                        (fs::path(d) / "head.ck").string());
      });
    }

    // Debiased-model encoder initialization.
    stage = "init";
    MlpModel encoder_init;
    std::string encoder_ref;
    if (cfg.init == "ssl") {
      encoder_ref = ssl_checkpoint_path(cfg.t_ssl);
      encoder_init = load_checkpoint(encoder_ref).model;
    } else if (cfg.init == "supervised") {
      encoder_ref = (fs::path(sup_dir) / "encoder.ck").string();
      encoder_init = load_checkpoint(encoder_ref).model;
    } else if (cfg.init == "random") {
      Rng rng = Rng(cfg.seed).substream("init.encoder");
      auto sizes = encoder_sizes(cfg);
      std::vector<Activation> acts(sizes.size() - 1, Activation::Relu);
      acts.back() = Activation::Identity;
      encoder_init = MlpModel::he_uniform(sizes, acts, rng);
      encoder_ref = "random";
    } else {
      throw std::invalid_argument("unknown init '" + cfg.init + "'");
    }

    // Bias proxy + soft confusion (ula only; erm and sla skip these).
    OffsetTable offsets;
    std::vector<int> proxy_valid_preds;
    if (cfg.mode == "ula") {
      stage = "probe";
      BiasProxy proxy;
      if (cfg.proxy_source == "ssl") {
        const std::string enc_path = ssl_checkpoint_path(cfg.t_ssl);
        nlohmann::json probe_in;
        probe_in["encoder"] = enc_path;
        probe_in["t_stop"] = cfg.t_stop;
        probe_in["t_stop_unit"] = cfg.t_stop_unit;
        probe_in["weight_decay"] = cfg.weight_decay;
        const std::string probe_dir =
            cache.ensure("probe", probe_in, [&](const std::string& d) {
              auto enc = load_checkpoint(enc_path).model;
              OptimConfig optim;
              optim.lr = 5e-3;  // fixed probe rate; wd follows the trial
              optim.weight_decay = cfg.weight_decay;
              // Probe seed derives from the data seed so the artifact is
              // shared across the eta/tau search, matching the
              // pretrain-once design.
              auto p = train_probe(enc, train_view, probe_budget(cfg), optim,
                                   cfg.batch,
                                   splitmix64(cfg.task.data_seed ^
                                              fnv1a64("probe")));
              p.encoder_ref = enc_path;
              save_proxy(p, d);
            });
        proxy = load_proxy(probe_dir);
      } else if (cfg.proxy_source == "supervised") {
        proxy.encoder =
            load_checkpoint((fs::path(sup_dir) / "encoder.ck").string()).model;
        proxy.head =
            load_checkpoint((fs::path(sup_dir) / "head.ck").string()).model;
        proxy.encoder_ref = sup_dir;
      } else {
        throw std::invalid_argument("unknown proxy_source '" +
                                    cfg.proxy_source + "'");
      }
      proxy.tau = cfg.tau;

      stage = "confusion";
      auto je = make_joint_estimate(proxy, train_view, cfg.alpha);
      auto proxy_train_preds = proxy_predict_view(proxy, train_view);
      offsets = make_offset_table_ula(je, proxy_train_preds, cfg.eta);
      proxy_valid_preds = proxy_predict_view(proxy, valid_view);
    } else if (cfg.mode == "sla") {
      stage = "sla-offsets";
      auto table = empirical_group_table(data.train);
      const double alpha =
          cfg.alpha < 0
              ? 1.0 / (static_cast<double>(k) * data.train.size())
              : cfg.alpha;
      auto cond = conditional_from_joint(table, alpha);
      offsets = make_offset_table_sla(cond, data.train, cfg.eta);
    } else if (cfg.mode != "erm") {
      throw std::invalid_argument("unknown mode '" + cfg.mode + "'");
    }

    // Validator: ula scores Eq.-cell balanced/worst accuracy with the
    // proxy; sla (bias-supervised path) uses true-group balanced accuracy;
    // erm falls back to i.i.d. validation accuracy.
    stage = "finetune";
    auto valid_labels = gather_labels(valid_view);
    UnsupValStats val_stats;
    Validator validator;
    if (cfg.mode == "ula") {
      const bool worst = cfg.validator == "worst";
      validator = [&, worst](std::span<const int> preds) {
        return worst ? unsupervised_worst_group_val(preds, proxy_valid_preds,
                                                    valid_view, {}, &val_stats)
                     : unsupervised_balanced_val(preds, proxy_valid_preds,
                                                 valid_view, {}, &val_stats);
      };
    } else if (cfg.mode == "sla") {
      validator = [&](std::span<const int> preds) {
        auto report = group_balanced_accuracy(preds, data.valid);
        return cfg.validator == "worst" ? report.worst : report.balanced;
      };
    } else {
      validator = [&](std::span<const int> preds) {
        return iid_accuracy(preds, valid_labels);
      };
    }

    auto init_model = make_debiased(encoder_init, k, cfg.seed);
    FinetuneConfig fcfg;
    fcfg.optim.lr = cfg.lr;
    fcfg.optim.weight_decay = cfg.weight_decay;
    fcfg.batch = cfg.batch;
    fcfg.max_epochs = cfg.max_epochs;
    fcfg.train_encoder = cfg.finetune_scope != "head_only";
    auto ft = finetune(init_model, offsets, train_view, valid_view, validator,
                       fcfg, cfg.seed);

    const std::string name =
        trial_name.empty()
            ? StageCache::key_of("trial", nlohmann::json(cfg))
            : trial_name;
    const fs::path trial_dir = fs::path(root) / "trials" / name;
    fs::create_directories(trial_dir);
    result.artifact_dir = trial_dir.string();
    write_curve_csv(ft.curve, (trial_dir / "curve.csv").string());

    if (ft.failed) {
      result.status = "failed";
      result.error = ft.failure;
    } else {
      stage = "eval";
      auto test_preds = predict_debiased_view(ft.best, TrainView(data.test));
      auto report = group_balanced_accuracy(test_preds, data.test);
      result.best_val_score = ft.best_score;
      result.best_epoch = ft.best_epoch;
      result.test_balanced = report.balanced;
      result.test_worst = report.worst;
      result.test_iid = report.iid;
      save_checkpoint(ft.best.net, ft.best_epoch,
                      (trial_dir / "best.ck").string());
      write_group_report_csv(report, (trial_dir / "group_report.csv").string());
      if (env.verbose && val_stats.degenerate) {
        std::cerr << "[ula] warning: validation partition degenerate ("
                  << val_stats.used_cells << " usable cells)\n";
      }
    }
    {
      nlohmann::json summary;
      summary["config"] = result.config;
      summary["status"] = result.status;
      summary["error"] = result.error;
      summary["best_val_score"] = result.best_val_score;
      summary["best_epoch"] = result.best_epoch;
      summary["test_balanced"] = result.test_balanced;
      summary["test_worst"] = result.test_worst;
      summary["test_iid"] = result.test_iid;
      std::ofstream out(trial_dir / "result.json", std::ios::trunc);
      out << summary.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("pipeline stage '" + stage + "' failed: " +
                             e.what());
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

}  // namespace ula
