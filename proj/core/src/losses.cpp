#include "idat/losses.hpp"

#include <cmath>
#include <string>

#include "idat/ops.hpp"

namespace idat {

const char* to_string(DistillLoss k) {
  switch (k) {
    case DistillLoss::kNone: return "none";
    case DistillLoss::kKl: return "kl";
    case DistillLoss::kMse: return "mse";
    case DistillLoss::kMae: return "mae";
    case DistillLoss::kCos: return "cos";
  }
  return "?";
}

DistillLoss distill_loss_from_string(std::string_view s) {
  if (s == "none") return DistillLoss::kNone;
  if (s == "kl") return DistillLoss::kKl;
  if (s == "mse") return DistillLoss::kMse;
  if (s == "mae") return DistillLoss::kMae;
  if (s == "cos") return DistillLoss::kCos;
  throw ConfigError("unknown distillation loss '" + std::string(s) +
                    "' (expected none|kl|mse|mae|cos)");
}

void DistillPlan::validate() const {
  if (lambda < 0.0) throw ConfigError("distillation lambda must be nonnegative");
  if (kind == DistillLoss::kKl && temperature <= 0.0) {
    throw ConfigError("KL temperature must be positive, got " +
                      std::to_string(temperature));
  }
}

namespace {

void require_logit_pair(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": logit shapes must match, got " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor one_hot(const Tensor& logits, std::span<const int> labels) {
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw DimensionError("label count " + std::to_string(labels.size()) +
                         " does not match batch size " + std::to_string(batch));
  }
  Tensor oh({batch, classes});
  auto v = oh.values();
  for (int i = 0; i < batch; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) {
      throw DataError("label " + std::to_string(y) + " at index " +
                      std::to_string(i) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
    v[static_cast<std::size_t>(i) * classes + y] = 1.0f;
  }
  return oh;
}

}  // namespace

Tensor loss_ce(const Tensor& logits, std::span<const int> labels, Tape* tape) {
  if (logits.rank() != 2) {
    throw DimensionError("loss_ce expects [B x K] logits, got " +
                         shape_str(logits.shape()));
  }
  Tensor oh = one_hot(logits, labels);
  Tensor ls = log_softmax(logits, 1, tape);
  Tensor picked = sum_axis(multiply(oh, ls, tape), 1, tape);  // [B x 1]
  return scale(mean_all(picked, tape), -1.0, tape);
}

Tensor loss_mse(const Tensor& y_s, const Tensor& y_t, Tape* tape) {
  require_logit_pair("loss_mse", y_s, y_t);
  Tensor d = subtract(y_s, y_t, tape);
  return mean_all(multiply(d, d, tape), tape);
}

Tensor loss_mae(const Tensor& y_s, const Tensor& y_t, Tape* tape) {
  require_logit_pair("loss_mae", y_s, y_t);
  return mean_all(abs(subtract(y_s, y_t, tape), tape), tape);
}

Tensor loss_cos(const Tensor& y_s, const Tensor& y_t, Tape* tape) {
  require_logit_pair("loss_cos", y_s, y_t);
  Tensor ss = sum_axis(multiply(y_s, y_s, tape), 1, tape);  // [B x 1]
  Tensor tt = sum_axis(multiply(y_t, y_t, tape), 1, tape);
  {
    auto vs = ss.values();
    auto vt = tt.values();
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (vs[i] == 0.0f || vt[i] == 0.0f) {
        throw DataError("loss_cos: zero-norm logit row at batch index " +
                        std::to_string(i));
      }
    }
  }
  Tensor dot = sum_axis(multiply(y_s, y_t, tape), 1, tape);
  Tensor denom = multiply(sqrt(ss, tape), sqrt(tt, tape), tape);
  Tensor sim = divide(dot, denom, tape);
  return mean_all(subtract(Tensor::scalar(1.0f), sim, tape), tape);
}

Tensor loss_kl(const Tensor& y_s, const Tensor& y_t, double temperature,
               KlConvention convention, Tape* tape) {
  require_logit_pair("loss_kl", y_s, y_t);
  if (temperature <= 0.0) {
    throw ConfigError("KL temperature must be positive, got " +
                      std::to_string(temperature));
  }
  const double inv_t = 1.0 / temperature;
  Tensor ls = log_softmax(scale(y_s, inv_t, tape), 1, tape);
  Tensor lt = log_softmax(scale(y_t, inv_t, tape), 1, tape);
  if (convention == KlConvention::kPaper) {
    Tensor weights = softmax(y_s, 1, tape);  // temperature-1 weighting
    Tensor per = sum_axis(multiply(weights, subtract(ls, lt, tape), tape), 1, tape);
    return mean_all(per, tape);
  }
  Tensor pt = softmax(scale(y_t, inv_t, tape), 1, tape);
  Tensor per = sum_axis(multiply(pt, subtract(lt, ls, tape), tape), 1, tape);
  return scale(mean_all(per, tape), temperature * temperature, tape);
}

std::pair<Tensor, LossBreakdown> loss_total(const Tensor& y_s,
                                            const std::optional<Tensor>& y_t,
                                            std::span<const int> labels,
                                            const DistillPlan& plan,
                                            Tape* tape) {
  plan.validate();
  if (!y_t.has_value() && plan.kind != DistillLoss::kNone) {
    throw UsageError("distillation loss requires teacher logits");
  }
  LossBreakdown parts;
  Tensor ce_s = loss_ce(y_s, labels, tape);
  parts.ce_s = ce_s.item();
  Tensor total = ce_s;
  if (y_t.has_value()) {
    Tensor ce_t = loss_ce(*y_t, labels, tape);
    parts.ce_t = ce_t.item();
    total = add(total, ce_t, tape);
  }
  if (plan.kind != DistillLoss::kNone) {
    const Tensor teacher_logits =
        plan.detach_teacher ? y_t->detached() : *y_t;
    // Computed for the report even at lambda == 0, but only contributes a
    // tape node when it actually enters the objective.
    Tape* dtape = plan.lambda > 0.0 ? tape : nullptr;
    Tensor d;
    switch (plan.kind) {
      case DistillLoss::kKl:
        d = loss_kl(y_s, teacher_logits, plan.temperature, plan.kl_convention, dtape);
        break;
      case DistillLoss::kMse:
        d = loss_mse(y_s, teacher_logits, dtape);
        break;
      case DistillLoss::kMae:
        d = loss_mae(y_s, teacher_logits, dtape);
        break;
      case DistillLoss::kCos:
        d = loss_cos(y_s, teacher_logits, dtape);
        break;
      case DistillLoss::kNone:
        break;
    }
    parts.distill = d.item();
    if (plan.lambda > 0.0) {
      total = add(total, scale(d, plan.lambda, tape), tape);
    }
  }
  parts.total = total.item();
  return {total, parts};
}

}  // namespace idat
