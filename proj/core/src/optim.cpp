#include "idat/optim.hpp"

#include <cmath>

namespace idat {

AdamW::AdamW(Model& model, AdamWConfig config)
    : model_(&model), config_(config) {
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    Slot s;
    s.param_index = i;
    s.m.assign(params[i].tensor.size(), 0.0);
    s.v.assign(params[i].tensor.size(), 0.0);
    slots_.push_back(std::move(s));
  }
}

void AdamW::step(double lr) {
  ++step_count_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (Slot& slot : slots_) {
    Parameter& p = model_->parameters()[slot.param_index];
    if (!p.tensor.grad_allocated()) {
      throw InternalError("missing gradient on trainable parameter '" + p.name + "'");
    }
    auto theta = p.tensor.values();
    auto grad = p.tensor.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      double t = static_cast<double>(theta[i]) * (1.0 - lr * config_.weight_decay);
      slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g;
      slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g * g;
      const double m_hat = slot.m[i] / bc1;
      const double v_hat = slot.v[i] / bc2;
      t -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      theta[i] = static_cast<float>(t);
    }
  }
}

double lr_schedule(long step, const ScheduleConfig& config) {
  if (config.total_steps < 1) throw ConfigError("schedule needs total_steps >= 1");
  if (config.warmup_steps > 0 && step < config.warmup_steps) {
    const double frac = static_cast<double>(step) / static_cast<double>(config.warmup_steps);
    return config.warmup_lr + (config.base_lr - config.warmup_lr) * frac;
  }
  const long last = config.total_steps - 1;
  if (step >= last) return 0.0;
  const long span = last - config.warmup_steps;
  if (span <= 0) return config.base_lr;
  const double t = static_cast<double>(step - config.warmup_steps) /
                   static_cast<double>(span);
  return config.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace idat
