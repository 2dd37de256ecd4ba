#include "idat/losses.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "support/gradcheck.hpp"

namespace {

using gradcheck::random_tensor;
using idat::DistillLoss;
using idat::DistillPlan;
using idat::Rng;
using idat::Tape;
using idat::Tensor;

TEST(LossCe, UniformLogitsGiveLogK) {
  const Tensor logits({2, 4});  // all zeros -> uniform
  const std::vector<int> labels{1, 3};
  EXPECT_NEAR(idat::loss_ce(logits, labels).item(), std::log(4.0), 1e-5);
}

TEST(LossCe, KnownValueFromLogSumExpOracle) {
  const Tensor logits({1, 3}, {1, 2, 3});
  const std::vector<int> labels{2};
  // -(3 - log(e^1 + e^2 + e^3)) per the double oracle.
  const double expect =
      -(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  EXPECT_NEAR(idat::loss_ce(logits, labels).item(), expect, 1e-6);
  EXPECT_NEAR(idat::loss_ce(logits, labels).item(), 0.40761, 1e-4);
}

TEST(LossCe, MarginDrivesLossToZero) {
  double prev = 1e9;
  for (float margin : {2.0f, 8.0f, 20.0f}) {
    const Tensor logits({1, 3}, {0.0f, 0.0f, margin});
    const std::vector<int> labels{2};
    const double v = idat::loss_ce(logits, labels).item();
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(LossCe, OutOfRangeLabelIsDataError) {
  const Tensor logits({2, 3});
  try {
    idat::loss_ce(logits, std::vector<int>{0, 3});
    FAIL() << "expected DataError";
  } catch (const idat::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
}

TEST(LossMse, IdentityAndArithmetic) {
  const Tensor a({1, 2}, {1, 0});
  const Tensor b({1, 2}, {0, 1});
  EXPECT_EQ(idat::loss_mse(a, a).item(), 0.0f);
  EXPECT_FLOAT_EQ(idat::loss_mse(a, b).item(), 1.0f);
  EXPECT_FLOAT_EQ(idat::loss_mae(a, b).item(), 1.0f);
  EXPECT_NEAR(idat::loss_cos(a, b).item(), 1.0f, 1e-6);  // orthogonal rows
  EXPECT_EQ(idat::loss_mae(a, a).item(), 0.0f);
  EXPECT_EQ(idat::loss_cos(a, a).item(), 0.0f);
}

TEST(LossMse, MatchesNaiveLoopOracle) {
  Rng rng(9, 1);
  const Tensor a = random_tensor({4, 6}, rng, -3.0f, 3.0f, false);
  const Tensor b = random_tensor({4, 6}, rng, -3.0f, 3.0f, false);
  const auto da = refmath::from_tensor(a);
  const auto db = refmath::from_tensor(b);
  EXPECT_NEAR(idat::loss_mse(a, b).item(), refmath::mse(da, db), 1e-6);
  EXPECT_NEAR(idat::loss_mae(a, b).item(), refmath::mae(da, db), 1e-6);
  EXPECT_NEAR(idat::loss_cos(a, b).item(), refmath::cos_loss(da, db), 1e-6);
}

TEST(LossSymmetry, MseMaeCosSymmetricKlNot) {
  Rng rng(10, 1);
  const Tensor a = random_tensor({3, 5}, rng, -2.0f, 2.0f, false);
  const Tensor b = random_tensor({3, 5}, rng, -2.0f, 2.0f, false);
  EXPECT_FLOAT_EQ(idat::loss_mse(a, b).item(), idat::loss_mse(b, a).item());
  EXPECT_FLOAT_EQ(idat::loss_mae(a, b).item(), idat::loss_mae(b, a).item());
  EXPECT_FLOAT_EQ(idat::loss_cos(a, b).item(), idat::loss_cos(b, a).item());
  // Counterexample: KL direction matters.
  const Tensor p({1, 2}, {0.0f, 0.0f});
  const Tensor q({1, 2}, {2.0f, 0.0f});
  EXPECT_NE(idat::loss_kl(p, q, 1.0).item(), idat::loss_kl(q, p, 1.0).item());
}

TEST(LossCos, ScaleInvariance) {
  Rng rng(11, 1);
  const Tensor a = random_tensor({3, 4}, rng, -2.0f, 2.0f, false);
  const Tensor b = random_tensor({3, 4}, rng, -2.0f, 2.0f, false);
  const float base = idat::loss_cos(a, b).item();
  const Tensor a2 = idat::scale(a, 3.7);
  const Tensor b2 = idat::scale(b, 0.21);
  EXPECT_NEAR(idat::loss_cos(a2, b2).item(), base, 1e-5);
}

TEST(LossCos, ZeroNormRowIsDataError) {
  const Tensor a({2, 2}, {1, 1, 0, 0});
  const Tensor b({2, 2}, {1, 1, 1, 1});
  EXPECT_THROW(idat::loss_cos(a, b), idat::DataError);
}

TEST(LossKl, ZeroWhenInputsEqual) {
  Rng rng(12, 1);
  for (double t : {1.0, 5.0, 10.0}) {
    const Tensor y = random_tensor({4, 5}, rng, -4.0f, 4.0f, false);
    EXPECT_NEAR(idat::loss_kl(y, y, t).item(), 0.0, 1e-7);
  }
}

TEST(LossKl, KnownValueAtTemperatureOne) {
  // KL([.5,.5] || [2/3,1/3]) = 0.5*ln(9/8)
  const Tensor ys({1, 2}, {0.0f, 0.0f});
  const Tensor yt({1, 2}, {static_cast<float>(std::log(2.0)), 0.0f});
  const double expect = 0.5 * std::log(9.0 / 8.0);
  EXPECT_NEAR(idat::loss_kl(ys, yt, 1.0).item(), expect, 1e-5);
  EXPECT_NEAR(expect, 0.05889, 1e-5);
}

TEST(LossKl, NonnegativeAtTemperatureOne) {
  Rng rng(13, 1);
  for (int c = 0; c < 2000; ++c) {
    const Tensor a = random_tensor({2, 4}, rng, -5.0f, 5.0f, false);
    const Tensor b = random_tensor({2, 4}, rng, -5.0f, 5.0f, false);
    EXPECT_GE(idat::loss_kl(a, b, 1.0).item(), -1e-7);
  }
}

TEST(LossKl, PaperFormMatchesOracleAtTemperatureFive) {
  Rng rng(14, 1);
  const Tensor a = random_tensor({3, 6}, rng, -3.0f, 3.0f, false);
  const Tensor b = random_tensor({3, 6}, rng, -3.0f, 3.0f, false);
  const auto da = refmath::from_tensor(a);
  const auto db = refmath::from_tensor(b);
  EXPECT_NEAR(idat::loss_kl(a, b, 5.0).item(), refmath::kl_paper(da, db, 5.0), 1e-6);
  EXPECT_NEAR(idat::loss_kl(a, b, 5.0, idat::KlConvention::kStandard).item(),
              refmath::kl_standard(da, db, 5.0), 2e-5);
}

TEST(LossKl, NonpositiveTemperatureIsConfigError) {
  const Tensor y({1, 2});
  EXPECT_THROW(idat::loss_kl(y, y, 0.0), idat::ConfigError);
  EXPECT_THROW(idat::loss_kl(y, y, -1.0), idat::ConfigError);
}

TEST(LossTotal, NoneIsExactlySumOfCrossEntropies) {
  Rng rng(15, 1);
  const Tensor ys = random_tensor({4, 3}, rng, -2.0f, 2.0f, false);
  const Tensor yt = random_tensor({4, 3}, rng, -2.0f, 2.0f, false);
  const std::vector<int> labels{0, 1, 2, 1};
  DistillPlan plan;
  plan.kind = DistillLoss::kNone;
  auto [loss, parts] = idat::loss_total(ys, yt, labels, plan);
  const float ce_s = idat::loss_ce(ys, labels).item();
  const float ce_t = idat::loss_ce(yt, labels).item();
  EXPECT_EQ(loss.item(), ce_s + ce_t);
  EXPECT_FALSE(parts.distill.has_value());

  DistillPlan zero = plan;
  zero.kind = DistillLoss::kKl;
  zero.lambda = 0.0;
  auto [loss0, parts0] = idat::loss_total(ys, yt, labels, zero);
  EXPECT_EQ(loss0.item(), loss.item());  // bit-identical
  EXPECT_TRUE(parts0.distill.has_value());
}

TEST(LossTotal, BreakdownRecombines) {
  Rng rng(16, 1);
  for (DistillLoss kind : {DistillLoss::kKl, DistillLoss::kMse,
                           DistillLoss::kMae, DistillLoss::kCos}) {
    const Tensor ys = random_tensor({4, 5}, rng, -2.0f, 2.0f, false);
    const Tensor yt = random_tensor({4, 5}, rng, -2.0f, 2.0f, false);
    const std::vector<int> labels{0, 4, 2, 1};
    DistillPlan plan;
    plan.kind = kind;
    plan.lambda = 0.7;
    plan.temperature = 5.0;
    auto [loss, parts] = idat::loss_total(ys, yt, labels, plan);
    ASSERT_TRUE(parts.ce_t.has_value());
    ASSERT_TRUE(parts.distill.has_value());
    EXPECT_NEAR(loss.item(),
                parts.ce_s + *parts.ce_t + plan.lambda * *parts.distill, 1e-6);
    EXPECT_EQ(parts.total, loss.item());
  }
}

TEST(LossTotal, MissingTeacherWithDistillIsUsageError) {
  const Tensor ys({2, 3});
  DistillPlan plan;
  plan.kind = DistillLoss::kMse;
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(idat::loss_total(ys, std::nullopt, labels, plan), idat::UsageError);
}

// Gradients of each loss w.r.t. both logit matrices, against the double
// oracle.
TEST(LossGradients, MatchFiniteDifferences) {
  const gradcheck::FdSpec spec;
  Rng rng(20, 1);
  const std::vector<int> labels{0, 2, 1};

  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&, const Tensor&, Tape*)> engine;
    std::function<double(const refmath::DMat&, const refmath::DMat&)> ref;
  };
  const std::vector<Case> cases = {
      {"ce",
       [&labels](const Tensor& a, const Tensor&, Tape* tape) {
         return idat::loss_ce(a, labels, tape);
       },
       [&labels](const refmath::DMat& a, const refmath::DMat&) {
         return refmath::ce(a, labels);
       }},
      {"mse",
       [](const Tensor& a, const Tensor& b, Tape* tape) {
         return idat::loss_mse(a, b, tape);
       },
       [](const refmath::DMat& a, const refmath::DMat& b) {
         return refmath::mse(a, b);
       }},
      {"mae",
       [](const Tensor& a, const Tensor& b, Tape* tape) {
         return idat::loss_mae(a, b, tape);
       },
       [](const refmath::DMat& a, const refmath::DMat& b) {
         return refmath::mae(a, b);
       }},
      {"cos",
       [](const Tensor& a, const Tensor& b, Tape* tape) {
         return idat::loss_cos(a, b, tape);
       },
       [](const refmath::DMat& a, const refmath::DMat& b) {
         return refmath::cos_loss(a, b);
       }},
      {"kl_paper",
       [](const Tensor& a, const Tensor& b, Tape* tape) {
         return idat::loss_kl(a, b, 5.0, idat::KlConvention::kPaper, tape);
       },
       [](const refmath::DMat& a, const refmath::DMat& b) {
         return refmath::kl_paper(a, b, 5.0);
       }},
      {"kl_standard",
       [](const Tensor& a, const Tensor& b, Tape* tape) {
         return idat::loss_kl(a, b, 5.0, idat::KlConvention::kStandard, tape);
       },
       [](const refmath::DMat& a, const refmath::DMat& b) {
         return refmath::kl_standard(a, b, 5.0);
       }},
  };

  for (const Case& c : cases) {
    for (int rep = 0; rep < 3; ++rep) {
      Tensor a = random_tensor({3, 4}, rng, -2.0f, 2.0f);
      Tensor b = random_tensor({3, 4}, rng, -2.0f, 2.0f);
      auto engine = [&](Tape* tape) { return c.engine(a, b, tape); };
      auto ref = [&]() {
        return c.ref(refmath::from_tensor(a), refmath::from_tensor(b));
      };
      const auto stats = gradcheck::check_against_reference(
          engine, ref, {a, b}, spec, c.name);
      EXPECT_EQ(stats.failures, 0) << c.name;
    }
  }
}

}  // namespace
