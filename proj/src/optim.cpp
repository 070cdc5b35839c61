#include "ula/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "ula/kernels.hpp"

namespace ula {

void adamw_step(MlpModel& model, OptimState& state,
                std::span<const double> gradient, double lr) {
  if (gradient.size() != model.num_params()) {
    throw std::invalid_argument("gradient size does not match parameters");
  }
  if (!all_finite(gradient)) {
    throw std::runtime_error(
        "non-finite gradient; aborting trial (step " +
        std::to_string(state.step_count + 1) + ")");
  }
  state.step_count += 1;
  const double bias_c1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bias_c2 = 1.0 - std::pow(state.beta2, state.step_count);
  kernels::adamw_update(model.mutable_params().data(),
                        state.first_moment.data(), state.second_moment.data(),
                        gradient.data(), model.num_params(), lr, state.beta1,
                        state.beta2, state.epsilon, state.weight_decay,
                        bias_c1, bias_c2);
}

double lr_at(const LrSchedule& sched, long step) {
  if (sched.total_steps <= 0) {
    throw std::invalid_argument("total_steps must be positive");
  }
  if (sched.kind == LrSchedule::Kind::Constant) return sched.base_lr;
  long s = step;
  if (s < 0) s = 0;
  if (s > sched.total_steps) s = sched.total_steps;
  const double frac = static_cast<double>(s) / sched.total_steps;
  return sched.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

}  // namespace ula
