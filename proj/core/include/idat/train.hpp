#pragma once

#include <optional>

#include "idat/data.hpp"
#include "idat/losses.hpp"
#include "idat/model.hpp"
#include "idat/optim.hpp"

namespace idat {

struct StepReport {
  long step = 0;
  double lr = 0.0;
  double ce_s = 0.0;
  std::optional<double> ce_t;
  std::optional<double> distill;
  double total = 0.0;
  double grad_norm_s = 0.0;
  std::optional<double> grad_norm_t;
};

// Joint teacher/student training state. The inverse-distillation direction
// (teacher no wider than the student) is validated at construction unless
// allow_larger_teacher is set.
class TrainState {
 public:
  TrainState(Model student, std::optional<Model> teacher, DistillPlan plan,
             AdamWConfig opt, ScheduleConfig schedule,
             bool allow_larger_teacher = false);

  // One forward of both models on the batch, one joint loss (ce_s [+ ce_t
  // + lambda * distill]), one backward, one AdamW update per model over
  // trainable parameters only.
  StepReport train_step(const Batch& batch);

  Model& student() { return student_; }
  const Model& student() const { return student_; }
  bool has_teacher() const { return teacher_.has_value(); }
  Model& teacher() { return *teacher_; }
  const Model& teacher() const { return *teacher_; }
  const DistillPlan& plan() const { return plan_; }
  long global_step() const { return global_step_; }

 private:
  Model student_;
  std::optional<Model> teacher_;
  DistillPlan plan_;
  ScheduleConfig schedule_;
  AdamW opt_student_;
  std::optional<AdamW> opt_teacher_;
  long global_step_ = 0;
};

// Top-1 accuracy over the dataset, teacher-free. Ties resolve to the lowest
// class index. Logits are bit-identical to those the same weights produce
// inside a training step.
double evaluate(const Model& model, const Dataset& ds, int batch_size = 64);

// L2 norm over all trainable-parameter gradients of a model.
double trainable_grad_norm(const Model& model);

}  // namespace idat
