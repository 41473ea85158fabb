#include <benchmark/benchmark.h>

#include <tuple>
#include <vector>

#include "uda/autodiff.hpp"
#include "uda/data.hpp"
#include "uda/losses.hpp"
#include "uda/nn.hpp"
#include "uda/proto.hpp"
#include "uda/trainer.hpp"

namespace {

using namespace uda;

// Feature-extractor-scale task shared by the heavier benchmarks, built once.
struct ScaleFixture {
  Dataset source;
  Dataset target;
  TrainConfig cfg;
  TrainState state;

  ScaleFixture()
      : source(), target(), cfg(make_config()), state(make_state()) {}

  static TrainConfig make_config() {
    TrainConfig cfg;
    cfg.pretrain_iters = 0;
    cfg.eval_every = 0;
    cfg.seed = 7;
    return cfg;
  }

  TrainState make_state() {
    std::tie(source, target) =
        gen_shifted_gaussians(31, 65, 2048, 0.5, 0.5, 30.0, 0.35, 7ULL);
    TrainState s = make_train_state(source, target, cfg);
    pretrain(s, source, cfg);
    return s;
  }
};

ScaleFixture& scale() {
  static ScaleFixture fixture;
  return fixture;
}

void BM_MatmulForward(benchmark::State& state) {
  Rng rng(1);
  Matrix a(64, 2048), b(2048, 1024);
  fill_normal(a, rng, 0.0, 1.0);
  fill_normal(b, rng, 0.0, 0.02);
  auto bn = make_const(b);
  for (auto _ : state) {
    auto out = matmul(make_const(a), bn);
    benchmark::DoNotOptimize(out->value(0, 0));
  }
}
BENCHMARK(BM_MatmulForward);

void BM_GeneratorForward(benchmark::State& state) {
  Rng rng(2);
  GeneratorNet net(2048, 1024, 512, 0.5, rng);
  Matrix x(64, 2048);
  fill_normal(x, rng, 0.0, 1.0);
  for (auto _ : state) {
    auto z = net.forward(make_const(x), true, rng);
    benchmark::DoNotOptimize(z->value(0, 0));
  }
}
BENCHMARK(BM_GeneratorForward);

void BM_SupervisedBackward(benchmark::State& state) {
  Rng rng(3);
  GeneratorNet net(2048, 1024, 512, 0.5, rng);
  NeuralClassifier head(512, 65, rng);
  Matrix x(64, 2048);
  fill_normal(x, rng, 0.0, 1.0);
  std::vector<int> y(64);
  for (int i = 0; i < 64; ++i) y[i] = i % 65;
  for (auto _ : state) {
    zero_grads(net.params());
    zero_grads(head.params());
    auto loss = mean_cross_entropy(head.forward(net.forward(make_const(x), true, rng)), y);
    backward(loss);
    benchmark::DoNotOptimize(loss->value(0, 0));
  }
}
BENCHMARK(BM_SupervisedBackward);

void BM_SlicedWasserstein(benchmark::State& state) {
  Rng rng(4);
  Matrix p(64, 65), q(64, 65);
  fill_normal(p, rng, 0.0, 1.0);
  fill_normal(q, rng, 0.2, 1.1);
  Matrix dirs = draw_projections(65, 128, rng);
  for (auto _ : state) {
    auto d = swd(make_const(p), make_const(q), dirs);
    benchmark::DoNotOptimize(d->value(0, 0));
  }
}
BENCHMARK(BM_SlicedWasserstein);

void BM_PrototypeRefinement(benchmark::State& state) {
  Rng rng(5);
  Matrix z_s(650, 512), z_t(2000, 512);
  fill_normal(z_s, rng, 0.0, 1.0);
  fill_normal(z_t, rng, 0.3, 1.0);
  std::vector<int> y(650);
  for (int i = 0; i < 650; ++i) y[i] = i % 65;
  auto protos = init_from_source(z_s, y, 65);
  for (auto _ : state) {
    auto refined = refine_on_target(protos, z_t, 3);
    benchmark::DoNotOptimize(refined.passes);
  }
}
BENCHMARK(BM_PrototypeRefinement);

void BM_AdversarialIteration(benchmark::State& state) {
  auto& f = scale();
  for (auto _ : state) {
    auto [x_a, y_a] = next_batch(f.state.source_batches, f.source);
    step_A(f.state, x_a, *y_a, f.cfg);
    auto [x_b, y_b] = next_batch(f.state.source_batches, f.source);
    auto [x_tb, y_tb] = next_batch(f.state.target_batches, f.target);
    step_B(f.state, x_b, *y_b, x_tb, f.cfg);
    auto [x_c, y_c] = next_batch(f.state.source_batches, f.source);
    auto [x_tc, y_tc] = next_batch(f.state.target_batches, f.target);
    step_C(f.state, x_c, *y_c, x_tc, f.cfg);
  }
}
BENCHMARK(BM_AdversarialIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
