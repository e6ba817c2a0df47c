#include <benchmark/benchmark.h>

#include "mslstm/augment.hpp"
#include "mslstm/data.hpp"
#include "mslstm/eval.hpp"
#include "mslstm/lstm.hpp"
#include "mslstm/model.hpp"
#include "mslstm/prng.hpp"
#include "mslstm/tape.hpp"
#include "mslstm/tensor.hpp"
#include "mslstm/train.hpp"

namespace {

using namespace mslstm;

Tensor random_tensor(std::vector<int> shape, Xoshiro256ss& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    v = rng.uniform(-1.0, 1.0);
  }
  return t;
}

GenConfig bench_data_config() {
  GenConfig cfg;
  cfg.n_classes = 8;
  cfg.samples = 32;
  cfg.seq_len = 10;
  cfg.ctx_dim = 16;
  cfg.act_dim = 16;
  cfg.ambiguity_horizon = 5;
  cfg.seed = 1;
  return cfg;
}

ModelDims bench_dims() { return ModelDims{16, 16, 0, 32, 8}; }

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Xoshiro256ss rng(1);
  const Tensor a = random_tensor({n, n}, rng);
  const Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

void BM_LstmStep(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  Xoshiro256ss rng(2);
  const LstmParams p = init_params(16, hidden, 3);
  const Tensor x = random_tensor({16}, rng);
  LstmState s = zero_state(hidden);
  for (auto _ : state) {
    s = lstm_step(p, x, s);
    benchmark::DoNotOptimize(s.h.data().data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(128);

void BM_LstmUnroll(benchmark::State& state) {
  Xoshiro256ss rng(4);
  const LstmParams p = init_params(16, 32, 5);
  const Tensor xs = random_tensor({20, 16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unroll(p, xs));
  }
}
BENCHMARK(BM_LstmUnroll);

void BM_SampleGradient(benchmark::State& state) {
  const Dataset ds = generate(bench_data_config());
  const MsLstmModel model = init_model(bench_dims(), ArchVariant::MultiStage,
                                       7);
  Tape tape;
  std::vector<Tensor> accum;
  for (const Tensor* t : model.parameters()) {
    accum.emplace_back(t->shape());
  }
  for (auto _ : state) {
    double loss = sample_gradient(tape, model, ds.samples[0], LossKind::PLGL,
                                  accum);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_SampleGradient);

void BM_TrainEpoch(benchmark::State& state) {
  const Dataset ds = generate(bench_data_config());
  const MsLstmModel initial = init_model(bench_dims(),
                                         ArchVariant::MultiStage, 7);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  for (auto _ : state) {
    MsLstmModel model = initial;
    benchmark::DoNotOptimize(train(model, ds, cfg));
  }
}
BENCHMARK(BM_TrainEpoch);

void BM_Evaluate(benchmark::State& state) {
  const Dataset ds = generate(bench_data_config());
  const MsLstmModel model = init_model(bench_dims(), ArchVariant::MultiStage,
                                       7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(model, ds, Pooling::AveragePool));
  }
}
BENCHMARK(BM_Evaluate);

void BM_AugmentGeometric(benchmark::State& state) {
  Xoshiro256ss rng(6);
  const Tensor image = random_tensor({240, 320, 3}, rng);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(augment_geometric(image, seed++));
  }
}
BENCHMARK(BM_AugmentGeometric);

}  // namespace

BENCHMARK_MAIN();
