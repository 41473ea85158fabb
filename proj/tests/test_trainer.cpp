#include "uda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "train_helpers.hpp"
#include "uda/autodiff.hpp"
#include "uda/errors.hpp"
#include "uda/eval.hpp"
#include "uda/losses.hpp"

using namespace uda;
using namespace uda::testing;

namespace {

double source_accuracy(TrainState& state, const Dataset& source) {
  Rng unused(0);
  const auto z =
      state.generator.forward(make_const(source.features), false, unused);
  const Matrix probs = state.classifier.forward(z)->value;
  int correct = 0;
  for (int i = 0; i < probs.rows(); ++i)
    if (argmax_row(probs, i) == (*source.labels)[i]) ++correct;
  return static_cast<double>(correct) / probs.rows();
}

// Discrepancy probe on a frozen direction set and dropout-free embeddings,
// so repeated measurements see only the effect of parameter updates.
double probe_discrepancy(TrainState& state, const Matrix& x_t,
                         const Matrix& directions, int proto_max_steps) {
  Rng unused(0);
  const auto z_t =
      state.generator.forward(make_const(x_t), false, unused);
  const auto y_n = state.classifier.forward(z_t);
  const RefineResult refined =
      refine_on_target(state.prototypes, z_t->value, proto_max_steps);
  const auto y_p = proto_predict(refined.prototypes, z_t);
  return swd(y_n, y_p, directions)->value(0, 0);
}

TrainState pretrained_toy_state(unsigned long long seed, TrainConfig& cfg) {
  cfg = tiny_config(seed);
  auto [source, target] = tiny_task(seed);
  TrainState state = make_train_state(source, target, cfg);
  pretrain(state, source, cfg);
  return state;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation rejects out-of-range values") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda1 = -0.1;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = TrainConfig{};
  cfg.sigma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = TrainConfig{};
  cfg.dropout_retain = 0.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg = TrainConfig{};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("training setup rejects mismatched data before any compute") {
  auto [source, target] = tiny_task(1ULL);
  const TrainConfig cfg = tiny_config(1ULL);

  Dataset narrow = target;
  narrow.features = Matrix(target.size(), 3);
  CHECK_THROWS_AS(make_train_state(source, narrow, cfg), config_error);

  Dataset unlabeled = source;
  unlabeled.labels.reset();
  CHECK_THROWS_AS(make_train_state(unlabeled, target, cfg), config_error);

  Dataset other_space = target;
  other_space.class_count = 5;
  CHECK_THROWS_AS(make_train_state(source, other_space, cfg), config_error);
}

TEST_CASE("pretraining fits linearly separable source data") {
  for (unsigned long long seed : {1ULL, 2ULL, 3ULL}) {
    TrainConfig cfg = tiny_config(seed);
    cfg.pretrain_iters = 500;
    auto [source, target] =
        gen_shifted_gaussians(100, 2, 2, 0.0, 0.0, 0.0, 0.3, seed);
    TrainState state = make_train_state(source, target, cfg);
    pretrain(state, source, cfg);
    CHECK(source_accuracy(state, source) >= 0.99);
  }
}

TEST_CASE("zero pretraining iterations leave the weights at init") {
  TrainConfig cfg = tiny_config(4ULL);
  cfg.pretrain_iters = 0;
  auto [source, target] = tiny_task(4ULL);
  TrainState state = make_train_state(source, target, cfg);
  const auto g0 = snapshot(state.generator.params());
  const auto c0 = snapshot(state.classifier.params());
  pretrain(state, source, cfg);
  CHECK(equals(g0, state.generator.params()));
  CHECK(equals(c0, state.classifier.params()));
  CHECK(state.prototypes.mu.all_finite());
  CHECK(row_norm(state.prototypes.mu, 0) > 0.0);
}

TEST_CASE("pretraining is a deterministic function of the seed") {
  TrainConfig cfg = tiny_config(5ULL);
  auto [source, target] = tiny_task(5ULL);
  TrainState a = make_train_state(source, target, cfg);
  TrainState b = make_train_state(source, target, cfg);
  pretrain(a, source, cfg);
  pretrain(b, source, cfg);
  CHECK(equals(snapshot(a.generator.params()), b.generator.params()));
  CHECK(equals(snapshot(a.classifier.params()), b.classifier.params()));
  CHECK(a.prototypes.mu == b.prototypes.mu);
}

TEST_CASE("discrepancy maximization step leaves the generator untouched") {
  TrainConfig cfg;
  TrainState state = pretrained_toy_state(6ULL, cfg);
  auto [source, target] = tiny_task(6ULL);
  const auto [x_s, y_s] = next_batch(state.source_batches, source);
  const auto [x_t, y_t] = next_batch(state.target_batches, target);

  const auto g0 = snapshot(state.generator.params());
  const Matrix mu0 = state.prototypes.mu;
  const auto c0 = snapshot(state.classifier.params());
  const LossBreakdown losses = step_B(state, x_s, *y_s, x_t, cfg);

  CHECK(equals(g0, state.generator.params()));
  CHECK(state.prototypes.mu == mu0);
  CHECK_FALSE(equals(c0, state.classifier.params()));
  CHECK(losses.all_finite());
  CHECK(losses.l_dis >= 0.0);
  for (const auto& p : state.generator.params()) CHECK(p->requires_grad);
}

TEST_CASE("generator step leaves both classifier heads untouched") {
  TrainConfig cfg;
  TrainState state = pretrained_toy_state(7ULL, cfg);
  auto [source, target] = tiny_task(7ULL);
  const auto [x_s, y_s] = next_batch(state.source_batches, source);
  const auto [x_t, y_t] = next_batch(state.target_batches, target);

  const auto c0 = snapshot(state.classifier.params());
  const auto g0 = snapshot(state.generator.params());
  IterationRecord rec;
  const LossBreakdown losses = step_C(state, x_s, *y_s, x_t, cfg, &rec);

  CHECK(equals(c0, state.classifier.params()));
  CHECK_FALSE(equals(g0, state.generator.params()));
  CHECK(losses.all_finite());
  CHECK(losses.l_m == losses.l_c - losses.l_d);
  CHECK(rec.n_confident >= 0);
  for (const auto& p : state.classifier.params()) CHECK(p->requires_grad);
}

TEST_CASE("zero lambda1 makes the adversarial step a plain source step") {
  TrainConfig cfg;
  TrainState state = pretrained_toy_state(8ULL, cfg);
  cfg.lambda1 = 0.0;
  auto [source, target] = tiny_task(8ULL);
  const auto [x_s, y_s] = next_batch(state.source_batches, source);
  const auto [x_t, y_t] = next_batch(state.target_batches, target);

  // Twin state advanced by hand: same forward draws, loss reduced to l_s.
  TrainState twin = make_train_state(source, target, cfg);
  pretrain(twin, source, cfg);
  {
    const auto g_params = twin.generator.params();
    set_requires_grad(g_params, false);
    const auto z_s = twin.generator.forward(make_const(x_s), true, twin.rng);
    const auto l_s = source_loss(twin.classifier.forward(z_s),
                                 proto_predict(twin.prototypes, z_s), *y_s);
    zero_grads(twin.classifier.params());
    zero_grads(g_params);
    backward(l_s);
    twin.adam_cn.step(twin.classifier.params());
    set_requires_grad(g_params, true);
  }

  step_B(state, x_s, *y_s, x_t, cfg);
  CHECK(equals(snapshot(twin.classifier.params()), state.classifier.params()));
}

TEST_CASE("fully ablated generator step is plain source supervision") {
  TrainConfig cfg;
  TrainState state = pretrained_toy_state(9ULL, cfg);
  cfg.ablation.disable_dis = true;
  cfg.ablation.disable_m = true;
  cfg.ablation.disable_em = true;
  auto [source, target] = tiny_task(9ULL);
  const auto [x_s, y_s] = next_batch(state.source_batches, source);
  const auto [x_t, y_t] = next_batch(state.target_batches, target);

  TrainState twin = make_train_state(source, target, cfg);
  pretrain(twin, source, cfg);
  {
    const auto c_params = twin.classifier.params();
    set_requires_grad(c_params, false);
    const auto z_s = twin.generator.forward(make_const(x_s), true, twin.rng);
    const auto l_s = source_loss(twin.classifier.forward(z_s),
                                 proto_predict(twin.prototypes, z_s), *y_s);
    zero_grads(twin.generator.params());
    zero_grads(c_params);
    backward(l_s);
    twin.adam_g.step(twin.generator.params());
    set_requires_grad(c_params, true);
  }

  const LossBreakdown losses = step_C(state, x_s, *y_s, x_t, cfg);
  CHECK(equals(snapshot(twin.generator.params()), state.generator.params()));
  CHECK(losses.l_dis == 0.0);
  CHECK(losses.l_em == 0.0);
  CHECK(losses.l_m == 0.0);
}

TEST_CASE("adversarial steps move the discrepancy in opposite directions") {
  TrainConfig cfg;
  TrainState state = pretrained_toy_state(10ULL, cfg);
  cfg.lambda1 = 1.0;
  auto [source, target] = tiny_task(10ULL);
  const auto [x_s, y_s] = next_batch(state.source_batches, source);
  const auto [x_t, y_t] = next_batch(state.target_batches, target);
  Rng probe_rng(424242ULL);
  const Matrix directions = draw_projections(3, 256, probe_rng);

  std::vector<double> deltas_up;
  for (int rep = 0; rep < 10; ++rep) {
    const double before =
        probe_discrepancy(state, x_t, directions, cfg.proto_max_steps);
    step_B(state, x_s, *y_s, x_t, cfg);
    deltas_up.push_back(
        probe_discrepancy(state, x_t, directions, cfg.proto_max_steps) -
        before);
  }
  std::sort(deltas_up.begin(), deltas_up.end());
  CHECK(deltas_up[4] + deltas_up[5] > 0.0);

  TrainConfig down = cfg;
  down.ablation.disable_em = true;
  down.ablation.disable_m = true;
  std::vector<double> deltas_down;
  for (int rep = 0; rep < 10; ++rep) {
    const double before =
        probe_discrepancy(state, x_t, directions, cfg.proto_max_steps);
    step_C(state, x_s, *y_s, x_t, down);
    deltas_down.push_back(
        probe_discrepancy(state, x_t, directions, cfg.proto_max_steps) -
        before);
  }
  std::sort(deltas_down.begin(), deltas_down.end());
  CHECK(deltas_down[4] + deltas_down[5] < 0.0);
}

TEST_CASE("training logs are reproducible bit for bit") {
  TrainConfig cfg = tiny_config(11ULL);
  cfg.eval_every = 10;
  auto [source, target] = tiny_task(11ULL);
  const TrainState a = train(source, target, cfg);
  const TrainState b = train(source, target, cfg);

  REQUIRE(a.loss_history.size() == b.loss_history.size());
  for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
    const auto& ra = a.loss_history[i];
    const auto& rb = b.loss_history[i];
    CHECK(ra.iter == rb.iter);
    CHECK(ra.losses.l_s == rb.losses.l_s);
    CHECK(ra.losses.l_dis == rb.losses.l_dis);
    CHECK(ra.losses.l_m == rb.losses.l_m);
    CHECK(ra.losses.l_em == rb.losses.l_em);
    CHECK(ra.n_confident == rb.n_confident);
    CHECK(ra.classes_present == rb.classes_present);
  }
  REQUIRE(a.metric_history.size() == b.metric_history.size());
  for (std::size_t i = 0; i < a.metric_history.size(); ++i) {
    CHECK(a.metric_history[i].acc_cn == b.metric_history[i].acc_cn);
    CHECK(a.metric_history[i].acc_cp == b.metric_history[i].acc_cp);
  }
  CHECK(equals(snapshot(a.generator.params()), b.generator.params()));
}

TEST_CASE("every logged record keeps l_m equal to l_c minus l_d") {
  TrainConfig cfg = tiny_config(12ULL);
  auto [source, target] = tiny_task(12ULL);
  const TrainState state = train(source, target, cfg);
  REQUIRE(state.loss_history.size() ==
          static_cast<std::size_t>(cfg.train_iters));
  for (const auto& rec : state.loss_history) {
    CHECK(rec.losses.l_m == rec.losses.l_c - rec.losses.l_d);
    CHECK(rec.losses.all_finite());
  }
  CHECK(state.iteration == cfg.train_iters);
}

TEST_CASE("no shift between domains keeps target accuracy at source level") {
  TrainConfig cfg = tiny_config(13ULL);
  cfg.pretrain_iters = 400;
  cfg.train_iters = 60;
  auto [source, target] =
      gen_shifted_gaussians(150, 3, 2, 0.0, 0.0, 0.0, 0.35, 13ULL);
  TrainState state = train(source, target, cfg);
  const double acc_source = source_accuracy(state, source);
  const EvalReport report = evaluate(state, target, cfg.proto_max_steps);
  CHECK(std::abs(report.acc_cp - acc_source) <= 0.02);
}

TEST_CASE("source-only ablation runs no adversarial steps") {
  TrainConfig cfg = tiny_config(14ULL);
  cfg.ablation.source_only = true;
  cfg.train_iters = 20;
  auto [source, target] = tiny_task(14ULL);
  const TrainState state = train(source, target, cfg);
  for (const auto& rec : state.loss_history) {
    CHECK(rec.losses.l_dis == 0.0);
    CHECK(rec.losses.l_em == 0.0);
    CHECK(rec.losses.l_m == 0.0);
    CHECK(rec.n_confident == 0);
  }
}

TEST_CASE("same-classifier variant trains a second neural head") {
  TrainConfig cfg = tiny_config(15ULL);
  cfg.ablation.same_classifier_variant = true;
  cfg.train_iters = 10;
  auto [source, target] = tiny_task(15ULL);
  TrainState state = make_train_state(source, target, cfg);
  REQUIRE(state.second_classifier.has_value());
  REQUIRE(state.adam_cp.has_value());

  // Differently seeded: the two heads must not start identical.
  CHECK_FALSE(state.classifier.layer1.weight->value ==
              state.second_classifier->layer1.weight->value);

  pretrain(state, source, cfg);
  const auto second0 = snapshot(state.second_classifier->params());
  run_training(state, source, target, cfg);
  // Step A keeps training the second head after warm-up.
  CHECK_FALSE(equals(second0, state.second_classifier->params()));

  const auto [x_s, y_s] = next_batch(state.source_batches, source);
  const auto [x_t, y_t] = next_batch(state.target_batches, target);
  const auto frozen = snapshot(state.second_classifier->params());
  step_B(state, x_s, *y_s, x_t, cfg);
  CHECK(equals(frozen, state.second_classifier->params()));
  step_C(state, x_s, *y_s, x_t, cfg);
  CHECK(equals(frozen, state.second_classifier->params()));
}

TEST_CASE("evaluation snapshots land on the configured interval") {
  TrainConfig cfg = tiny_config(16ULL);
  cfg.train_iters = 20;
  cfg.eval_every = 5;
  auto [source, target] = tiny_task(16ULL);
  const TrainState state = train(source, target, cfg);
  REQUIRE(state.metric_history.size() == 4);
  for (std::size_t i = 0; i < state.metric_history.size(); ++i) {
    CHECK(state.metric_history[i].iter == static_cast<long>(5 * (i + 1)));
    CHECK(state.metric_history[i].acc_cp >= 0.0);
    CHECK(state.metric_history[i].acc_cp <= 1.0);
  }
}

}
