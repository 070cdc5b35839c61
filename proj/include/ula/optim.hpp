#pragma once

#include <span>

#include "ula/mlp.hpp"

namespace ula {

struct OptimConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double base_lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimState for_model(const MlpModel& m, const OptimConfig& cfg) {
    OptimState s;
    s.first_moment.assign(m.num_params(), 0.0);
    s.second_moment.assign(m.num_params(), 0.0);
    s.base_lr = cfg.lr;
    s.weight_decay = cfg.weight_decay;
    s.beta1 = cfg.beta1;
    s.beta2 = cfg.beta2;
    s.epsilon = cfg.eps;
    return s;
  }
};

// Decoupled AdamW step at learning rate lr (the schedule decides lr; the
// state's base_lr is its step-0 value). Throws std::runtime_error on a
// non-finite gradient so the harness can mark the trial failed.
void adamw_step(MlpModel& model, OptimState& state,
                std::span<const double> gradient, double lr);

struct LrSchedule {
  enum class Kind { Cosine, Constant };
  double base_lr = 1e-3;
  long total_steps = 1;
  Kind kind = Kind::Cosine;
};

// Cosine: base_lr * 0.5 * (1 + cos(pi * step / total_steps)). Steps outside
// [0, total_steps] clamp to the endpoints.
double lr_at(const LrSchedule& sched, long step);

}  // namespace ula
