#include <benchmark/benchmark.h>

#include "idat/data.hpp"
#include "idat/losses.hpp"
#include "idat/model.hpp"
#include "idat/ops.hpp"
#include "idat/train.hpp"

namespace {

idat::Tensor random_tensor(std::vector<int> shape, uint64_t stream) {
  idat::Rng rng(42, stream);
  idat::Tensor t(std::move(shape));
  for (float& v : t.values()) v = rng.normal();
  return t;
}

void BM_MatMul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const idat::Tensor a = random_tensor({n, n}, 1);
  const idat::Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(idat::matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);

void BM_Softmax(benchmark::State& state) {
  const idat::Tensor x = random_tensor({256, 256}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(idat::softmax(x, 1));
  }
}
BENCHMARK(BM_Softmax);

idat::Model desk_model() {
  idat::ViTConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 8;
  cfg.depth = 4;
  cfg.width = 64;
  cfg.heads = 4;
  idat::Rng rng(7, 1);
  idat::Model m = idat::Model::build(cfg, rng);
  idat::Rng arng(7, 3);
  m.inject_adapters(idat::AdapterSpec{}, arng);
  return m;
}

void BM_ForwardBatch32(benchmark::State& state) {
  const idat::Model m = desk_model();
  const idat::Tensor images = random_tensor({32, 32, 32, 3}, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.forward(images));
  }
}
BENCHMARK(BM_ForwardBatch32);

void BM_TrainStep(benchmark::State& state) {
  idat::SyntheticSpec spec;
  spec.num_classes = 10;
  spec.samples_per_class = 4;
  const idat::Dataset ds = idat::generate_synthetic(spec);
  const auto batches = idat::make_batches(ds, 32, 1, 0);

  idat::DistillPlan plan;
  plan.kind = idat::DistillLoss::kKl;
  idat::ViTConfig tcfg;
  tcfg.image_size = 32;
  tcfg.patch_size = 8;
  tcfg.depth = 2;
  tcfg.width = 32;
  tcfg.heads = 2;
  idat::Rng trng(7, 101);
  idat::Model teacher = idat::Model::build(tcfg, trng);
  idat::Rng targ(7, 103);
  teacher.inject_adapters(idat::AdapterSpec{}, targ);

  idat::ScheduleConfig sched;
  sched.total_steps = 1 << 20;
  idat::TrainState ts(desk_model(), std::move(teacher), plan, idat::AdamWConfig{}, sched);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ts.train_step(batches[0]));
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
