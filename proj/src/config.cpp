#include "ula/config.hpp"

#include <fstream>
#include <stdexcept>

namespace ula {

TaskConfig colored_task_default() {
  TaskConfig t;
  t.kind = "colored";
  t.num_classes = 10;
  t.beta = 0.01;
  t.n_train = 15000;
  t.n_valid = 3000;
  t.n_test = 10000;
  t.noise = 0.25;
  return t;
}

TaskConfig grid_task_default() {
  TaskConfig t;
  t.kind = "grid";
  t.num_classes = 6;
  t.colors_per_shape = 3;
  t.n_train = 15000;
  t.n_valid = 3000;
  t.n_test = 7200;
  t.noise = 0.25;
  return t;
}

TrialConfig default_trial(const std::string& task_kind) {
  TrialConfig c;
  c.task = task_kind == "grid" ? grid_task_default() : colored_task_default();
  // Color-touching augmentations stay weak: the proxy premise needs the
  // bias attribute to survive pretraining (bias-retention suite).
  c.ssl.aug.crop_min_scale = 0.75;
  c.ssl.aug.tint_jitter = 0.1;
  c.ssl.aug.gray_prob = 0.05;
  c.ssl.aug.noise_std = 0.05;
  c.ssl.aug.flip_prob = 0.5;
  return c;
}

void to_json(nlohmann::json& j, const TaskConfig& c) {
  j = {{"kind", c.kind},
       {"num_classes", c.num_classes},
       {"beta", c.beta},
       {"colors_per_shape", c.colors_per_shape},
       {"n_train", c.n_train},
       {"n_valid", c.n_valid},
       {"n_test", c.n_test},
       {"noise", c.noise},
       {"data_seed", c.data_seed}};
}

void from_json(const nlohmann::json& j, TaskConfig& c) {
  c.kind = j.value("kind", c.kind);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.beta = j.value("beta", c.beta);
  c.colors_per_shape = j.value("colors_per_shape", c.colors_per_shape);
  c.n_train = j.value("n_train", c.n_train);
  c.n_valid = j.value("n_valid", c.n_valid);
  c.n_test = j.value("n_test", c.n_test);
  c.noise = j.value("noise", c.noise);
  c.data_seed = j.value("data_seed", c.data_seed);
}

void to_json(nlohmann::json& j, const AugConfig& c) {
  j = {{"crop_min_scale", c.crop_min_scale},
       {"tint_jitter", c.tint_jitter},
       {"gray_prob", c.gray_prob},
       {"noise_std", c.noise_std},
       {"flip_prob", c.flip_prob}};
}

void from_json(const nlohmann::json& j, AugConfig& c) {
  c.crop_min_scale = j.value("crop_min_scale", c.crop_min_scale);
  c.tint_jitter = j.value("tint_jitter", c.tint_jitter);
  c.gray_prob = j.value("gray_prob", c.gray_prob);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.flip_prob = j.value("flip_prob", c.flip_prob);
}

void to_json(nlohmann::json& j, const SslStageConfig& c) {
  j = {{"epochs", c.epochs},
       {"checkpoint_every", c.checkpoint_every},
       {"batch", c.batch},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"temperature", c.temperature},
       {"proj_dim", c.proj_dim},
       {"use_momentum_encoder", c.use_momentum_encoder},
       {"momentum", c.momentum},
       {"queue_size", c.queue_size},
       {"seed", c.seed},
       {"aug", c.aug}};
}

void from_json(const nlohmann::json& j, SslStageConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.temperature = j.value("temperature", c.temperature);
  c.proj_dim = j.value("proj_dim", c.proj_dim);
  c.use_momentum_encoder = j.value("use_momentum_encoder", c.use_momentum_encoder);
  c.momentum = j.value("momentum", c.momentum);
  c.queue_size = j.value("queue_size", c.queue_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("aug")) c.aug = j.at("aug").get<AugConfig>();
}

void to_json(nlohmann::json& j, const SupervisedStageConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch", c.batch},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SupervisedStageConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const TrialConfig& c) {
  j = {{"task", c.task},
       {"ssl", c.ssl},
       {"supervised", c.supervised},
       {"seed", c.seed},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"eta", c.eta},
       {"tau", c.tau},
       {"t_ssl", c.t_ssl},
       {"t_stop", c.t_stop},
       {"t_stop_unit", c.t_stop_unit},
       {"batch", c.batch},
       {"max_epochs", c.max_epochs},
       {"validator", c.validator},
       {"mode", c.mode},
       {"init", c.init},
       {"proxy_source", c.proxy_source},
       {"finetune_scope", c.finetune_scope},
       {"alpha", c.alpha},
       {"encoder_hidden", c.encoder_hidden}};
}

void from_json(const nlohmann::json& j, TrialConfig& c) {
  if (j.contains("task")) c.task = j.at("task").get<TaskConfig>();
  if (j.contains("ssl")) c.ssl = j.at("ssl").get<SslStageConfig>();
  if (j.contains("supervised")) {
    c.supervised = j.at("supervised").get<SupervisedStageConfig>();
  }
  c.seed = j.value("seed", c.seed);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.eta = j.value("eta", c.eta);
  c.tau = j.value("tau", c.tau);
  c.t_ssl = j.value("t_ssl", c.t_ssl);
  c.t_stop = j.value("t_stop", c.t_stop);
  c.t_stop_unit = j.value("t_stop_unit", c.t_stop_unit);
  c.batch = j.value("batch", c.batch);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.validator = j.value("validator", c.validator);
  c.mode = j.value("mode", c.mode);
  c.init = j.value("init", c.init);
  c.proxy_source = j.value("proxy_source", c.proxy_source);
  c.finetune_scope = j.value("finetune_scope", c.finetune_scope);
  c.alpha = j.value("alpha", c.alpha);
  c.encoder_hidden =
      j.value("encoder_hidden", c.encoder_hidden);
}

TrialConfig load_trial_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad config " + path + ": " + e.what());
  }
  TrialConfig c = default_trial(j.value("task", nlohmann::json::object())
                                    .value("kind", "colored"));
  from_json(j, c);
  return c;
}

}  // namespace ula
