#ifndef UDA_TRAINER_HPP
#define UDA_TRAINER_HPP

#include <optional>
#include <span>
#include <vector>

#include "uda/data.hpp"
#include "uda/losses.hpp"
#include "uda/nn.hpp"
#include "uda/proto.hpp"

namespace uda {

struct AblationFlags {
  bool disable_dis = false;
  bool disable_m = false;
  bool disable_em = false;
  // Replace the prototypical classifier with a second, differently seeded
  // neural classifier of the same architecture.
  bool same_classifier_variant = false;
  // Baseline: every iteration runs only the source-supervision update.
  bool source_only = false;
};

struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double sigma = 0.03;
  double lr = 0.001;
  double pretrain_lr = 0.001;
  long pretrain_iters = 2000;
  long train_iters = 1000;
  int batch_size = 64;
  int num_projections = 128;
  int proto_max_steps = 3;
  double temperature = 1.0;
  int hidden_dim = 1024;
  int embed_dim = 512;
  double dropout_retain = 0.5;
  long eval_every = 50;
  unsigned long long seed = 0;
  AblationFlags ablation;

  void validate() const;  // throws config_error
};

struct IterationRecord {
  long iter = 0;
  LossBreakdown losses;
  int n_confident = 0;
  std::vector<int> classes_present;
};

struct EvalRecord {
  long iter = 0;
  double acc_cn = 0.0;
  double acc_cp = 0.0;
};

struct TrainState {
  GeneratorNet generator;
  NeuralClassifier classifier;
  std::optional<NeuralClassifier> second_classifier;
  Prototypes prototypes;
  AdamState adam_g;
  AdamState adam_cn;
  std::optional<AdamState> adam_cp;
  long iteration = 0;
  Rng rng;
  BatchIterator source_batches;
  BatchIterator target_batches;
  std::vector<IterationRecord> loss_history;
  std::vector<EvalRecord> metric_history;
};

// Fresh networks, optimizers and batch streams for this data/config pair.
// All randomness chains from cfg.seed. Throws config_error on mismatched
// dimensions or label spaces before touching any weights.
TrainState make_train_state(const Dataset& source, const Dataset& target,
                            const TrainConfig& cfg);

// Source-only warm-up: cross-entropy of the neural classifier (and of the
// second classifier under the same-classifier variant) for pretrain_iters
// batches, then prototype initialization from the full source set.
void pretrain(TrainState& state, const Dataset& source, const TrainConfig& cfg);

// One joint update of generator + classifier heads on the source loss;
// prototypes are refreshed from this batch afterwards.
LossBreakdown step_A(TrainState& state, const Matrix& x_s,
                     std::span<const int> y_s, const TrainConfig& cfg);

// One update of the neural classifier on l_s - lambda1 * l_dis with the
// generator frozen; maximizes the classifier discrepancy on target.
LossBreakdown step_B(TrainState& state, const Matrix& x_s,
                     std::span<const int> y_s, const Matrix& x_t,
                     const TrainConfig& cfg);

// One update of the generator on l_s + l_em + lambda1 * l_dis +
// lambda2 * l_m with both classifier heads frozen. When record is given,
// its n_confident and classes_present fields are filled from the
// confidence filter.
LossBreakdown step_C(TrainState& state, const Matrix& x_s,
                     std::span<const int> y_s, const Matrix& x_t,
                     const TrainConfig& cfg, IterationRecord* record = nullptr);

// The A/B/C loop from state.iteration up to cfg.train_iters, logging one
// IterationRecord per iteration and an EvalRecord every eval_every
// iterations (labeled target only). Throws numeric_error when a logged
// loss goes non-finite.
void run_training(TrainState& state, const Dataset& source,
                  const Dataset& target, const TrainConfig& cfg);

// make_train_state + pretrain + run_training.
TrainState train(const Dataset& source, const Dataset& target,
                 const TrainConfig& cfg);

}  // namespace uda

#endif
