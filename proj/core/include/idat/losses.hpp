#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "idat/tensor.hpp"

namespace idat {

enum class DistillLoss { kNone, kKl, kMse, kMae, kCos };

const char* to_string(DistillLoss k);
DistillLoss distill_loss_from_string(std::string_view s);

// How the KL distillation term is computed. kPaper keeps the published
// form: softmax(y_s) * log(softmax(y_s/T) / softmax(y_t/T)), with the
// weighting factor at temperature 1 and no T^2 gradient rescaling.
// kStandard is the conventional T^2 * KL(softmax(y_t/T) || softmax(y_s/T))
// for comparison experiments.
enum class KlConvention { kPaper, kStandard };

struct DistillPlan {
  DistillLoss kind = DistillLoss::kNone;
  double lambda = 1.0;
  double temperature = 5.0;
  KlConvention kl_convention = KlConvention::kPaper;
  bool detach_teacher = false;

  void validate() const;
};

// Mean over the batch of -log softmax(logits)[label].
Tensor loss_ce(const Tensor& logits, std::span<const int> labels,
               Tape* tape = nullptr);

// Mean squared / absolute difference over all B*K logit entries.
Tensor loss_mse(const Tensor& y_s, const Tensor& y_t, Tape* tape = nullptr);
Tensor loss_mae(const Tensor& y_s, const Tensor& y_t, Tape* tape = nullptr);

// Mean over the batch of (1 - cosine similarity) between logit rows.
Tensor loss_cos(const Tensor& y_s, const Tensor& y_t, Tape* tape = nullptr);

// Temperature-softened divergence between student and teacher logits,
// averaged over the batch. Gradients flow into both inputs.
Tensor loss_kl(const Tensor& y_s, const Tensor& y_t, double temperature,
               KlConvention convention = KlConvention::kPaper,
               Tape* tape = nullptr);

struct LossBreakdown {
  double ce_s = 0.0;
  std::optional<double> ce_t;
  std::optional<double> distill;
  double total = 0.0;
};

// Joint objective: ce(student) [+ ce(teacher)] [+ lambda * distill term].
// Without a teacher the plan kind must be kNone.
std::pair<Tensor, LossBreakdown> loss_total(const Tensor& y_s,
                                            const std::optional<Tensor>& y_t,
                                            std::span<const int> labels,
                                            const DistillPlan& plan,
                                            Tape* tape = nullptr);

}  // namespace idat
