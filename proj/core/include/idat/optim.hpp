#pragma once

#include <vector>

#include "idat/model.hpp"

namespace idat {

struct AdamWConfig {
  double lr = 5e-3;  // base rate; per-step value comes from the schedule
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Decoupled-weight-decay Adam over a model's trainable parameters. Moment
// buffers exist only for trainable parameters; frozen ones are never read
// or written. Decay is applied to the parameter before the moment update:
// theta <- theta * (1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps).
class AdamW {
 public:
  AdamW(Model& model, AdamWConfig config);

  // One update using the given learning rate (from lr_schedule).
  void step(double lr);

  long steps_taken() const { return step_count_; }
  const AdamWConfig& config() const { return config_; }

 private:
  struct Slot {
    std::size_t param_index;
    std::vector<double> m;
    std::vector<double> v;
  };
  Model* model_;
  AdamWConfig config_;
  std::vector<Slot> slots_;
  long step_count_ = 0;
};

struct ScheduleConfig {
  double base_lr = 5e-3;
  double warmup_lr = 1e-7;
  long warmup_steps = 0;
  long total_steps = 1;
};

// Linear warmup from warmup_lr to base_lr, then cosine decay reaching zero
// at the final step (step runs in [0, total_steps)).
double lr_schedule(long step, const ScheduleConfig& config);

}  // namespace idat
