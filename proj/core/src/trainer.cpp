#include "uda/trainer.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "uda/errors.hpp"
#include "uda/eval.hpp"

namespace uda {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw config_error(what);
}

std::vector<NodePtr> head_params(TrainState& s) {
  std::vector<NodePtr> params = s.classifier.params();
  if (s.second_classifier) {
    auto extra = s.second_classifier->params();
    params.insert(params.end(), extra.begin(), extra.end());
  }
  return params;
}

void zero_all_grads(TrainState& s) {
  zero_grads(s.generator.params());
  zero_grads(head_params(s));
}

// C_P's probabilities for a source embedding: the prototype head, or the
// second neural head under the same-classifier variant.
NodePtr source_head(TrainState& s, const NodePtr& z_s) {
  return s.second_classifier ? s.second_classifier->forward(z_s)
                             : proto_predict(s.prototypes, z_s);
}

// C_P's probabilities for a target embedding. The prototype head first
// refines its prototypes on this batch's embedding values; gradients still
// flow through z_t only.
NodePtr target_head(TrainState& s, const NodePtr& z_t, int proto_max_steps) {
  if (s.second_classifier) return s.second_classifier->forward(z_t);
  const RefineResult refined =
      refine_on_target(s.prototypes, z_t->value, proto_max_steps);
  return proto_predict(refined.prototypes, z_t);
}

void check_finite(const LossBreakdown& losses, long iteration) {
  if (!losses.all_finite())
    throw numeric_error(
        "non-finite loss at iteration " + std::to_string(iteration), iteration);
}

}  // namespace

void TrainConfig::validate() const {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "loss weights must be >= 0");
  require(sigma >= 0.0 && sigma <= 1.0, "confidence threshold must be in [0,1]");
  require(lr > 0.0 && pretrain_lr > 0.0, "learning rates must be > 0");
  require(pretrain_iters >= 0 && train_iters >= 0,
          "iteration counts must be >= 0");
  require(batch_size >= 1, "batch size must be >= 1");
  require(num_projections >= 1, "projection count must be >= 1");
  require(proto_max_steps >= 1, "refinement steps must be >= 1");
  require(temperature > 0.0, "temperature must be > 0");
  require(hidden_dim >= 1 && embed_dim >= 1, "layer widths must be >= 1");
  require(dropout_retain > 0.0 && dropout_retain <= 1.0,
          "dropout retain probability must be in (0,1]");
  require(eval_every >= 0, "evaluation interval must be >= 0");
}

TrainState make_train_state(const Dataset& source, const Dataset& target,
                            const TrainConfig& cfg) {
  cfg.validate();
  require(source.labeled(), "training requires labeled source data");
  require(source.class_count >= 2, "training requires at least 2 classes");
  require(source.dim() == target.dim(),
          "feature dimensions differ: source " + std::to_string(source.dim()) +
              ", target " + std::to_string(target.dim()));
  require(!target.labeled() || target.class_count == source.class_count,
          "label spaces differ: source " + std::to_string(source.class_count) +
              " classes, target " + std::to_string(target.class_count));

  Rng seeder(cfg.seed);
  const auto seed_g = seeder();
  const auto seed_cn = seeder();
  const auto seed_cp = seeder();
  const auto seed_src = seeder();
  const auto seed_tgt = seeder();
  const auto seed_run = seeder();

  Rng rng_g(seed_g), rng_cn(seed_cn), rng_cp(seed_cp);
  GeneratorNet generator(source.dim(), cfg.hidden_dim, cfg.embed_dim,
                         cfg.dropout_retain, rng_g);
  NeuralClassifier classifier(cfg.embed_dim, source.class_count, rng_cn);
  std::optional<NeuralClassifier> second;
  if (cfg.ablation.same_classifier_variant)
    second.emplace(cfg.embed_dim, source.class_count, rng_cp);

  const auto g_params = generator.params();
  const auto c_params = classifier.params();
  AdamState adam_g(g_params, cfg.lr);
  AdamState adam_cn(c_params, cfg.lr);
  std::optional<AdamState> adam_cp;
  if (second) {
    const auto p = second->params();
    adam_cp.emplace(p, cfg.lr);
  }

  Prototypes prototypes;
  prototypes.mu = Matrix(source.class_count, cfg.embed_dim);
  prototypes.source_counts.assign(source.class_count, 0);
  prototypes.target_counts.assign(source.class_count, 0);
  prototypes.temperature = cfg.temperature;

  return TrainState{std::move(generator),
                    std::move(classifier),
                    std::move(second),
                    std::move(prototypes),
                    std::move(adam_g),
                    std::move(adam_cn),
                    std::move(adam_cp),
                    0,
                    Rng(seed_run),
                    BatchIterator(source.size(), cfg.batch_size, seed_src),
                    BatchIterator(target.size(), cfg.batch_size, seed_tgt),
                    {},
                    {}};
}

void pretrain(TrainState& state, const Dataset& source,
              const TrainConfig& cfg) {
  std::vector<NodePtr> params = state.generator.params();
  {
    const auto heads = head_params(state);
    params.insert(params.end(), heads.begin(), heads.end());
  }
  AdamState warm(params, cfg.pretrain_lr);
  for (long it = 0; it < cfg.pretrain_iters; ++it) {
    const auto [x, y] = next_batch(state.source_batches, source);
    const auto z = state.generator.forward(make_const(x), true, state.rng);
    NodePtr loss = mean_cross_entropy(state.classifier.forward(z), *y);
    if (state.second_classifier)
      loss = add(loss,
                 mean_cross_entropy(state.second_classifier->forward(z), *y));
    zero_grads(params);
    backward(loss);
    warm.step(params);
    if (!std::isfinite(loss->value(0, 0)))
      throw numeric_error("non-finite warm-up loss at iteration " +
                              std::to_string(it),
                          it);
  }

  Rng unused(0);
  const auto z_all =
      state.generator.forward(make_const(source.features), false, unused);
  state.prototypes = init_from_source(z_all->value, *source.labels,
                                      source.class_count, cfg.temperature);
}

LossBreakdown step_A(TrainState& state, const Matrix& x_s,
                     std::span<const int> y_s, const TrainConfig& cfg) {
  const auto z_s = state.generator.forward(make_const(x_s), true, state.rng);
  const auto y_n = state.classifier.forward(z_s);
  const auto y_p = source_head(state, z_s);
  const auto loss = source_loss(y_n, y_p, y_s);

  zero_all_grads(state);
  backward(loss);
  state.adam_g.step(state.generator.params());
  state.adam_cn.step(state.classifier.params());
  if (state.adam_cp) state.adam_cp->step(state.second_classifier->params());

  if (!state.second_classifier) {
    Rng unused(0);
    const auto z_clean =
        state.generator.forward(make_const(x_s), false, unused);
    refresh_from_batch(state.prototypes, z_clean->value, y_s);
  }

  LossBreakdown out;
  out.l_s = loss->value(0, 0);
  (void)cfg;
  return out;
}

LossBreakdown step_B(TrainState& state, const Matrix& x_s,
                     std::span<const int> y_s, const Matrix& x_t,
                     const TrainConfig& cfg) {
  const auto g_params = state.generator.params();
  set_requires_grad(g_params, false);
  std::vector<NodePtr> second_params;
  if (state.second_classifier) {
    second_params = state.second_classifier->params();
    set_requires_grad(second_params, false);
  }

  const auto z_s = state.generator.forward(make_const(x_s), true, state.rng);
  const auto l_s =
      source_loss(state.classifier.forward(z_s), source_head(state, z_s), y_s);

  NodePtr objective = l_s;
  LossBreakdown out;
  out.l_s = l_s->value(0, 0);
  if (!cfg.ablation.disable_dis) {
    const auto z_t = state.generator.forward(make_const(x_t), true, state.rng);
    const auto y_n_t = state.classifier.forward(z_t);
    const auto y_p_t = target_head(state, z_t, cfg.proto_max_steps);
    const auto l_dis = swd(y_n_t, y_p_t, cfg.num_projections, state.rng);
    out.l_dis = l_dis->value(0, 0);
    objective = sub(objective, scale(l_dis, cfg.lambda1));
  }

  zero_all_grads(state);
  backward(objective);
  state.adam_cn.step(state.classifier.params());

  set_requires_grad(g_params, true);
  if (!second_params.empty()) set_requires_grad(second_params, true);
  return out;
}

LossBreakdown step_C(TrainState& state, const Matrix& x_s,
                     std::span<const int> y_s, const Matrix& x_t,
                     const TrainConfig& cfg, IterationRecord* record) {
  const auto c_params = head_params(state);
  set_requires_grad(c_params, false);

  const auto z_s = state.generator.forward(make_const(x_s), true, state.rng);
  const auto l_s =
      source_loss(state.classifier.forward(z_s), source_head(state, z_s), y_s);

  LossBreakdown out;
  out.l_s = l_s->value(0, 0);
  NodePtr objective = l_s;

  const bool needs_target = !cfg.ablation.disable_em ||
                            !cfg.ablation.disable_dis ||
                            !cfg.ablation.disable_m;
  if (needs_target) {
    const auto z_t = state.generator.forward(make_const(x_t), true, state.rng);
    const auto y_n_t = state.classifier.forward(z_t);
    const auto y_p_t = target_head(state, z_t, cfg.proto_max_steps);

    if (!cfg.ablation.disable_em) {
      const auto l_em = entropy_loss(y_n_t, y_p_t);
      out.l_em = l_em->value(0, 0);
      objective = add(objective, l_em);
    }
    if (!cfg.ablation.disable_dis) {
      const auto l_dis = swd(y_n_t, y_p_t, cfg.num_projections, state.rng);
      out.l_dis = l_dis->value(0, 0);
      objective = add(objective, scale(l_dis, cfg.lambda1));
    }
    if (!cfg.ablation.disable_m) {
      const ConfidentSubset subset = filter_confident(y_p_t->value, cfg.sigma);
      if (record) {
        record->n_confident = static_cast<int>(subset.indices.size());
        record->classes_present = subset.classes_present;
      }
      if (!subset.indices.empty()) {
        const AlignmentTerms terms = alignment_loss(z_s, y_s, z_t, subset);
        out.l_c = terms.l_c->value(0, 0);
        out.l_d = terms.l_d->value(0, 0);
        out.l_m = out.l_c - out.l_d;
        objective =
            add(objective, scale(sub(terms.l_c, terms.l_d), cfg.lambda2));
      }
    }
  }

  zero_all_grads(state);
  backward(objective);
  state.adam_g.step(state.generator.params());

  set_requires_grad(c_params, true);
  return out;
}

void run_training(TrainState& state, const Dataset& source,
                  const Dataset& target, const TrainConfig& cfg) {
  for (long it = state.iteration; it < cfg.train_iters; ++it) {
    const auto [x_a, y_a] = next_batch(state.source_batches, source);
    IterationRecord rec;
    rec.iter = it;
    if (cfg.ablation.source_only) {
      rec.losses = step_A(state, x_a, *y_a, cfg);
    } else {
      check_finite(step_A(state, x_a, *y_a, cfg), it);
      const auto [x_b, y_b] = next_batch(state.source_batches, source);
      const auto [t_b, tl_b] = next_batch(state.target_batches, target);
      check_finite(step_B(state, x_b, *y_b, t_b, cfg), it);
      const auto [x_c, y_c] = next_batch(state.source_batches, source);
      const auto [t_c, tl_c] = next_batch(state.target_batches, target);
      rec.losses = step_C(state, x_c, *y_c, t_c, cfg, &rec);
    }
    check_finite(rec.losses, it);
    state.loss_history.push_back(std::move(rec));
    state.iteration = it + 1;

    if (cfg.eval_every > 0 && target.labeled() &&
        (it + 1) % cfg.eval_every == 0) {
      const EvalReport report = evaluate(state, target, cfg.proto_max_steps);
      state.metric_history.push_back(
          EvalRecord{it + 1, report.acc_cn, report.acc_cp});
    }
  }
}

TrainState train(const Dataset& source, const Dataset& target,
                 const TrainConfig& cfg) {
  TrainState state = make_train_state(source, target, cfg);
  pretrain(state, source, cfg);
  run_training(state, source, target, cfg);
  return state;
}

}  // namespace uda
