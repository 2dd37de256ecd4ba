#include "idat/train.hpp"

#include <cmath>

namespace idat {

TrainState::TrainState(Model student, std::optional<Model> teacher,
                       DistillPlan plan, AdamWConfig opt,
                       ScheduleConfig schedule, bool allow_larger_teacher)
    : student_(std::move(student)),
      teacher_(std::move(teacher)),
      plan_(plan),
      schedule_(schedule),
      opt_student_(student_, opt) {
  plan_.validate();
  if (!teacher_.has_value()) {
    if (plan_.kind != DistillLoss::kNone) {
      throw ConfigError("a distillation loss requires a teacher model");
    }
    return;
  }
  if (!allow_larger_teacher &&
      teacher_->config().width > student_.config().width) {
    throw ConfigError(
        "teacher width " + std::to_string(teacher_->config().width) +
        " exceeds student width " + std::to_string(student_.config().width) +
        "; pass allow_larger_teacher to run forward distillation");
  }
  opt_teacher_.emplace(*teacher_, opt);
}

double trainable_grad_norm(const Model& model) {
  double acc = 0.0;
  for (const Parameter& p : model.parameters()) {
    if (!p.trainable) continue;
    for (float g : p.tensor.grad()) acc += static_cast<double>(g) * g;
  }
  return std::sqrt(acc);
}

StepReport TrainState::train_step(const Batch& batch) {
  Tape tape;
  student_.zero_grads();
  if (teacher_) teacher_->zero_grads();

  Tensor y_s = student_.forward(batch.images, &tape);
  std::optional<Tensor> y_t;
  if (teacher_) y_t = teacher_->forward(batch.images, &tape);

  auto [loss, parts] = loss_total(y_s, y_t, batch.labels, plan_, &tape);
  tape.backward(loss);

  const double lr = lr_schedule(global_step_, schedule_);
  StepReport report;
  report.step = global_step_;
  report.lr = lr;
  report.ce_s = parts.ce_s;
  report.ce_t = parts.ce_t;
  report.distill = parts.distill;
  report.total = parts.total;
  report.grad_norm_s = trainable_grad_norm(student_);
  if (teacher_) report.grad_norm_t = trainable_grad_norm(*teacher_);

  opt_student_.step(lr);
  if (opt_teacher_) opt_teacher_->step(lr);
  ++global_step_;
  return report;
}

double evaluate(const Model& model, const Dataset& ds, int batch_size) {
  if (!ds.images.defined() || ds.labels.empty()) {
    throw UsageError("evaluate requires a non-empty dataset");
  }
  if (batch_size < 1) throw UsageError("evaluate batch_size must be >= 1");
  const int n = ds.count();
  const std::size_t pixels =
      static_cast<std::size_t>(ds.height()) * ds.width() * ds.channels();
  auto vi = ds.images.values();
  long correct = 0;
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    Tensor images({b, ds.height(), ds.width(), ds.channels()});
    auto vo = images.values();
    std::copy(vi.begin() + static_cast<std::ptrdiff_t>(start * pixels),
              vi.begin() + static_cast<std::ptrdiff_t>((start + b) * pixels),
              vo.begin());
    Tensor logits = model.forward(images);
    auto lv = logits.values();
    const int k = logits.dim(1);
    for (int i = 0; i < b; ++i) {
      int best = 0;
      float best_v = lv[static_cast<std::size_t>(i) * k];
      for (int j = 1; j < k; ++j) {
        const float v = lv[static_cast<std::size_t>(i) * k + j];
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      if (best == ds.labels[static_cast<std::size_t>(start + i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

}  // namespace idat
