#include "uda/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "train_helpers.hpp"
#include "uda/errors.hpp"

using namespace uda;
using namespace uda::testing;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("uda_test_" + name);
}

std::string rng_text(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

bool same_adam(const AdamState& a, const AdamState& b) {
  if (a.lr != b.lr || a.t != b.t) return false;
  if (a.m.size() != b.m.size()) return false;
  for (std::size_t i = 0; i < a.m.size(); ++i)
    if (!(a.m[i] == b.m[i]) || !(a.v[i] == b.v[i])) return false;
  return true;
}

TrainState partly_trained(unsigned long long seed, long iters,
                          TrainConfig& cfg) {
  cfg = tiny_config(seed);
  cfg.train_iters = iters;
  cfg.eval_every = 5;
  auto [source, target] = tiny_task(seed);
  return train(source, target, cfg);
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip restores every field of the training state") {
  TrainConfig cfg;
  const TrainState state = partly_trained(21ULL, 12, cfg);
  const auto path = temp_file("roundtrip.ckpt");
  save_checkpoint(state, path.string());
  const TrainState back = load_checkpoint(path.string());
  std::filesystem::remove(path);

  CHECK(equals(snapshot(state.generator.params()), back.generator.params()));
  CHECK(equals(snapshot(state.classifier.params()), back.classifier.params()));
  CHECK_FALSE(back.second_classifier.has_value());
  CHECK(back.generator.dropout_retain == state.generator.dropout_retain);

  CHECK(same_adam(state.adam_g, back.adam_g));
  CHECK(same_adam(state.adam_cn, back.adam_cn));

  CHECK(back.prototypes.mu == state.prototypes.mu);
  CHECK(back.prototypes.temperature == state.prototypes.temperature);
  CHECK(back.prototypes.source_counts == state.prototypes.source_counts);
  CHECK(back.prototypes.target_counts == state.prototypes.target_counts);

  CHECK(back.iteration == state.iteration);
  CHECK(rng_text(back.rng) == rng_text(state.rng));
  CHECK(back.source_batches.serialize_state() ==
        state.source_batches.serialize_state());
  CHECK(back.target_batches.serialize_state() ==
        state.target_batches.serialize_state());

  REQUIRE(back.loss_history.size() == state.loss_history.size());
  for (std::size_t i = 0; i < state.loss_history.size(); ++i) {
    CHECK(back.loss_history[i].iter == state.loss_history[i].iter);
    CHECK(back.loss_history[i].losses.l_s == state.loss_history[i].losses.l_s);
    CHECK(back.loss_history[i].losses.l_dis ==
          state.loss_history[i].losses.l_dis);
    CHECK(back.loss_history[i].losses.l_m == state.loss_history[i].losses.l_m);
    CHECK(back.loss_history[i].n_confident ==
          state.loss_history[i].n_confident);
    CHECK(back.loss_history[i].classes_present ==
          state.loss_history[i].classes_present);
  }
  REQUIRE(back.metric_history.size() == state.metric_history.size());
  for (std::size_t i = 0; i < state.metric_history.size(); ++i) {
    CHECK(back.metric_history[i].iter == state.metric_history[i].iter);
    CHECK(back.metric_history[i].acc_cn == state.metric_history[i].acc_cn);
    CHECK(back.metric_history[i].acc_cp == state.metric_history[i].acc_cp);
  }
}

TEST_CASE("round trip covers the same-classifier variant") {
  TrainConfig cfg = tiny_config(22ULL);
  cfg.ablation.same_classifier_variant = true;
  cfg.train_iters = 6;
  auto [source, target] = tiny_task(22ULL);
  const TrainState state = train(source, target, cfg);
  const auto path = temp_file("variant.ckpt");
  save_checkpoint(state, path.string());
  const TrainState back = load_checkpoint(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.second_classifier.has_value());
  REQUIRE(back.adam_cp.has_value());
  CHECK(equals(snapshot(state.second_classifier->params()),
               back.second_classifier->params()));
  CHECK(same_adam(*state.adam_cp, *back.adam_cp));
}

TEST_CASE("resumed training matches the uninterrupted run bit for bit") {
  TrainConfig full_cfg = tiny_config(23ULL);
  full_cfg.train_iters = 24;
  full_cfg.eval_every = 6;
  auto [source, target] = tiny_task(23ULL);
  const TrainState straight = train(source, target, full_cfg);

  TrainConfig half_cfg = full_cfg;
  half_cfg.train_iters = 12;
  const TrainState half = train(source, target, half_cfg);
  const auto path = temp_file("resume.ckpt");
  save_checkpoint(half, path.string());
  TrainState resumed = load_checkpoint(path.string());
  std::filesystem::remove(path);
  run_training(resumed, source, target, full_cfg);

  CHECK(equals(snapshot(straight.generator.params()),
               resumed.generator.params()));
  CHECK(equals(snapshot(straight.classifier.params()),
               resumed.classifier.params()));
  CHECK(straight.prototypes.mu == resumed.prototypes.mu);
  CHECK(rng_text(straight.rng) == rng_text(resumed.rng));
  CHECK(straight.iteration == resumed.iteration);

  REQUIRE(straight.loss_history.size() == resumed.loss_history.size());
  for (std::size_t i = 0; i < straight.loss_history.size(); ++i) {
    CHECK(straight.loss_history[i].losses.l_s ==
          resumed.loss_history[i].losses.l_s);
    CHECK(straight.loss_history[i].losses.l_dis ==
          resumed.loss_history[i].losses.l_dis);
    CHECK(straight.loss_history[i].losses.l_em ==
          resumed.loss_history[i].losses.l_em);
  }
  REQUIRE(straight.metric_history.size() == resumed.metric_history.size());
  for (std::size_t i = 0; i < straight.metric_history.size(); ++i)
    CHECK(straight.metric_history[i].acc_cp ==
          resumed.metric_history[i].acc_cp);
}

TEST_CASE("identical runs serialize to identical bytes") {
  TrainConfig cfg;
  const TrainState a = partly_trained(24ULL, 8, cfg);
  const TrainState b = partly_trained(24ULL, 8, cfg);
  const auto path_a = temp_file("bytes_a.ckpt");
  const auto path_b = temp_file("bytes_b.ckpt");
  save_checkpoint(a, path_a.string());
  save_checkpoint(b, path_b.string());

  std::ifstream fa(path_a, std::ios::binary);
  std::ifstream fb(path_b, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                            std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                            std::istreambuf_iterator<char>());
  CHECK(bytes_a == bytes_b);
  CHECK(!bytes_a.empty());
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("foreign and truncated files are rejected") {
  const auto junk = temp_file("junk.ckpt");
  {
    std::ofstream out(junk, std::ios::binary);
    out << "this is not a checkpoint at all, not even close";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(junk.string()),
                       doctest::Contains("magic"), data_error);
  std::filesystem::remove(junk);

  TrainConfig cfg;
  const TrainState state = partly_trained(25ULL, 4, cfg);
  const auto path = temp_file("trunc.ckpt");
  save_checkpoint(state, path.string());
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full / 2);
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                       doctest::Contains("truncated"), data_error);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/uda_nope.ckpt"), data_error);
}

}
