#include "idat/optim.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace {

using idat::AdamW;
using idat::AdamWConfig;
using idat::Model;
using idat::Rng;
using idat::ScheduleConfig;
using idat::ViTConfig;

ViTConfig tiny_config() {
  ViTConfig cfg;
  cfg.image_size = 8;
  cfg.patch_size = 4;
  cfg.channels = 1;
  cfg.depth = 1;
  cfg.width = 8;
  cfg.heads = 2;
  cfg.mlp_ratio = 2;
  cfg.num_classes = 3;
  return cfg;
}

TEST(AdamW, ZeroGradientIsPureDecay) {
  Rng rng(1, 1);
  Model m = Model::build(tiny_config(), rng);
  const auto before = m.param("head.weight").tensor.clone();
  AdamWConfig cfg;
  cfg.weight_decay = 0.01;
  AdamW opt(m, cfg);
  m.zero_grads();
  opt.step(0.1);
  const auto after = m.param("head.weight").tensor.values();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_NEAR(after[i], 0.999f * before.values()[i], 1e-7);
  }
}

TEST(AdamW, FirstStepIsSignedUnitStep) {
  Rng rng(2, 1);
  Model m = Model::build(tiny_config(), rng);
  const auto before = m.param("head.weight").tensor.clone();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt(m, cfg);
  m.zero_grads();
  auto grads = m.param("head.weight").tensor.grad();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    grads[i] = i % 2 == 0 ? 0.5f : -2.0f;
  }
  const double lr = 0.01;
  opt.step(lr);
  const auto after = m.param("head.weight").tensor.values();
  for (std::size_t i = 0; i < after.size(); ++i) {
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    EXPECT_NEAR(after[i], before.values()[i] - lr * sign, 1e-5);
  }
}

TEST(AdamW, DrivesQuadraticTowardZero) {
  // f(theta) = theta^2, gradient 2*theta; |theta| must strictly decrease.
  Rng rng(3, 1);
  Model m = Model::build(tiny_config(), rng);
  auto theta = m.param("head.bias").tensor;
  for (float& v : theta.values()) v = 1.0f;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt(m, cfg);
  double prev = 1.0;
  for (int step = 0; step < 10; ++step) {
    m.zero_grads();
    auto g = theta.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0f * theta.values()[i];
    opt.step(0.05);
    const double now = std::fabs(theta.values()[0]);
    EXPECT_LT(now, prev);
    prev = now;
  }
}

TEST(AdamW, TouchesExactlyTheTrainableSet) {
  Rng rng(4, 1);
  Model m = Model::build(tiny_config(), rng);
  idat::AdapterSpec spec;
  spec.hidden_dim = 2;
  Rng arng(4, 3);
  m.inject_adapters(spec, arng);

  std::vector<std::vector<float>> snapshot;
  for (const auto& p : m.parameters()) {
    snapshot.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  AdamW opt(m, AdamWConfig{});
  m.zero_grads();
  for (auto& p : m.parameters()) {
    if (p.trainable) {
      auto g = p.tensor.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.25f;
    }
  }
  opt.step(0.01);
  for (std::size_t pi = 0; pi < m.parameters().size(); ++pi) {
    const auto& p = m.parameters()[pi];
    bool changed = false;
    for (std::size_t i = 0; i < p.tensor.size(); ++i) {
      if (p.tensor.values()[i] != snapshot[pi][i]) {
        changed = true;
        break;
      }
    }
    EXPECT_EQ(changed, p.trainable) << p.name;
  }
}

TEST(AdamW, MissingGradIsInternalError) {
  Rng rng(5, 1);
  Model m = Model::build(tiny_config(), rng);
  AdamW opt(m, AdamWConfig{});
  EXPECT_THROW(opt.step(0.01), idat::InternalError);
}

TEST(Schedule, WarmupEndpointsAndCosineTail) {
  ScheduleConfig cfg;
  cfg.base_lr = 5e-3;
  cfg.warmup_lr = 1e-7;
  cfg.warmup_steps = 100;
  cfg.total_steps = 1000;
  EXPECT_DOUBLE_EQ(idat::lr_schedule(0, cfg), 1e-7);
  EXPECT_DOUBLE_EQ(idat::lr_schedule(100, cfg), 5e-3);  // warmup end: base exactly
  EXPECT_LE(idat::lr_schedule(999, cfg), 1e-9);         // cosine tail
  // Monotone rise through warmup.
  for (long s = 1; s <= 100; ++s) {
    EXPECT_GT(idat::lr_schedule(s, cfg), idat::lr_schedule(s - 1, cfg));
  }
  // Monotone decay after warmup.
  for (long s = 101; s < 1000; ++s) {
    EXPECT_LE(idat::lr_schedule(s, cfg), idat::lr_schedule(s - 1, cfg));
  }
}

TEST(Schedule, NoWarmupStartsAtBase) {
  ScheduleConfig cfg;
  cfg.base_lr = 1e-2;
  cfg.warmup_steps = 0;
  cfg.total_steps = 10;
  EXPECT_DOUBLE_EQ(idat::lr_schedule(0, cfg), 1e-2);
  EXPECT_DOUBLE_EQ(idat::lr_schedule(9, cfg), 0.0);
}

}  // namespace
