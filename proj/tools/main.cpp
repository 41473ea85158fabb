#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uda/checkpoint.hpp"
#include "uda/config.hpp"
#include "uda/data.hpp"
#include "uda/errors.hpp"
#include "uda/eval.hpp"
#include "uda/gradcheck.hpp"
#include "uda/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uda;

namespace {

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

FileFormat pick_format(const std::string& path, const std::string& choice) {
  if (choice == "csv") return FileFormat::csv;
  if (choice == "binary") return FileFormat::binary;
  return fs::path(path).extension() == ".bin" ? FileFormat::binary
                                              : FileFormat::csv;
}

json config_json(const TrainConfig& cfg) {
  return json{{"lambda1", cfg.lambda1},
              {"lambda2", cfg.lambda2},
              {"sigma", cfg.sigma},
              {"lr", cfg.lr},
              {"pretrain_lr", cfg.pretrain_lr},
              {"pretrain_iters", cfg.pretrain_iters},
              {"train_iters", cfg.train_iters},
              {"batch_size", cfg.batch_size},
              {"num_projections", cfg.num_projections},
              {"proto_max_steps", cfg.proto_max_steps},
              {"temperature", cfg.temperature},
              {"hidden_dim", cfg.hidden_dim},
              {"embed_dim", cfg.embed_dim},
              {"dropout_retain", cfg.dropout_retain},
              {"eval_every", cfg.eval_every},
              {"seed", cfg.seed},
              {"disable_dis", cfg.ablation.disable_dis},
              {"disable_m", cfg.ablation.disable_m},
              {"disable_em", cfg.ablation.disable_em},
              {"same_classifier_variant",
               cfg.ablation.same_classifier_variant},
              {"source_only", cfg.ablation.source_only}};
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  out << content;
  if (!out) throw data_error("write failed for " + path.string());
}

void write_run_log(const TrainState& state, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  std::size_t next_metric = 0;
  for (const auto& rec : state.loss_history) {
    const json line{{"iter", rec.iter},
                    {"l_s", rec.losses.l_s},
                    {"l_dis", rec.losses.l_dis},
                    {"l_c", rec.losses.l_c},
                    {"l_d", rec.losses.l_d},
                    {"l_m", rec.losses.l_m},
                    {"l_em", rec.losses.l_em},
                    {"n_confident", rec.n_confident},
                    {"classes_present", rec.classes_present}};
    out << line.dump() << '\n';
    while (next_metric < state.metric_history.size() &&
           state.metric_history[next_metric].iter == rec.iter + 1) {
      const auto& m = state.metric_history[next_metric++];
      const json eval_line{{"iter", m.iter},
                           {"acc_cn", m.acc_cn},
                           {"acc_cp", m.acc_cp}};
      out << eval_line.dump() << '\n';
    }
  }
  if (!out) throw data_error("write failed for " + path.string());
}

std::vector<int> head_predictions(const TrainState& state, const NodePtr& z,
                                  bool refine, int proto_max_steps) {
  Matrix probs;
  if (state.second_classifier) {
    probs = state.second_classifier->forward(z)->value;
  } else if (refine) {
    const RefineResult refined =
        refine_on_target(state.prototypes, z->value, proto_max_steps);
    probs = proto_predict(refined.prototypes, z)->value;
  } else {
    probs = proto_predict(state.prototypes, z)->value;
  }
  std::vector<int> preds(probs.rows());
  for (int i = 0; i < probs.rows(); ++i) preds[i] = argmax_row(probs, i);
  return preds;
}

void write_projection(const TrainState& state, const Dataset& source,
                      const Dataset& target, int proto_max_steps,
                      const fs::path& path) {
  Rng unused(0);
  const auto z_s =
      state.generator.forward(make_const(source.features), false, unused);
  const auto z_t =
      state.generator.forward(make_const(target.features), false, unused);

  Matrix stacked(source.size() + target.size(), z_s->value.cols());
  for (int i = 0; i < source.size(); ++i)
    for (int j = 0; j < stacked.cols(); ++j)
      stacked(i, j) = z_s->value(i, j);
  for (int i = 0; i < target.size(); ++i)
    for (int j = 0; j < stacked.cols(); ++j)
      stacked(source.size() + i, j) = z_t->value(i, j);

  const PcaResult pca = pca_project(stacked);
  std::vector<int> domains(stacked.rows(), 0);
  std::vector<int> labels(stacked.rows(), -1);
  for (int i = 0; i < source.size(); ++i)
    labels[i] = (*source.labels)[i];
  for (int i = 0; i < target.size(); ++i) {
    domains[source.size() + i] = 1;
    if (target.labels) labels[source.size() + i] = (*target.labels)[i];
  }
  std::vector<int> preds =
      head_predictions(state, z_s, false, proto_max_steps);
  const std::vector<int> target_preds =
      head_predictions(state, z_t, true, proto_max_steps);
  preds.insert(preds.end(), target_preds.begin(), target_preds.end());

  write_projection_csv(path.string(), pca.coords, domains, labels, preds);
}

struct TrainOptions {
  std::string config_path;
  std::string source_path;
  std::string target_path;
  std::string out_dir;
  std::string format = "auto";
  std::vector<std::string> ablate;
  std::optional<unsigned long long> seed;
  std::optional<double> lambda1, lambda2, sigma, lr, pretrain_lr, temperature,
      dropout_retain;
  std::optional<long> iters, pretrain_iters, eval_every;
  std::optional<int> batch, projections, proto_steps, hidden, embed;
};

TrainConfig resolve_config(const TrainOptions& opt) {
  TrainConfig cfg;
  if (!opt.config_path.empty()) apply_config_file(cfg, opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.lambda1) cfg.lambda1 = *opt.lambda1;
  if (opt.lambda2) cfg.lambda2 = *opt.lambda2;
  if (opt.sigma) cfg.sigma = *opt.sigma;
  if (opt.lr) cfg.lr = *opt.lr;
  if (opt.pretrain_lr) cfg.pretrain_lr = *opt.pretrain_lr;
  if (opt.temperature) cfg.temperature = *opt.temperature;
  if (opt.dropout_retain) cfg.dropout_retain = *opt.dropout_retain;
  if (opt.iters) cfg.train_iters = *opt.iters;
  if (opt.pretrain_iters) cfg.pretrain_iters = *opt.pretrain_iters;
  if (opt.eval_every) cfg.eval_every = *opt.eval_every;
  if (opt.batch) cfg.batch_size = *opt.batch;
  if (opt.projections) cfg.num_projections = *opt.projections;
  if (opt.proto_steps) cfg.proto_max_steps = *opt.proto_steps;
  if (opt.hidden) cfg.hidden_dim = *opt.hidden;
  if (opt.embed) cfg.embed_dim = *opt.embed;
  for (const auto& name : opt.ablate) {
    if (name == "dis")
      cfg.ablation.disable_dis = true;
    else if (name == "m")
      cfg.ablation.disable_m = true;
    else if (name == "em")
      cfg.ablation.disable_em = true;
    else if (name == "same")
      cfg.ablation.same_classifier_variant = true;
    else if (name == "source")
      cfg.ablation.source_only = true;
    else
      throw config_error("unknown ablation '" + name + "'");
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainOptions& opt) {
  const TrainConfig cfg = resolve_config(opt);

  const Dataset source = load_features(
      opt.source_path, pick_format(opt.source_path, opt.format),
      DomainTag::source);
  const Dataset target = load_features(
      opt.target_path, pick_format(opt.target_path, opt.format),
      DomainTag::target);

  const fs::path out(opt.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw data_error("cannot create output directory " + out.string());

  json manifest{
      {"artifact_version", UDA_VERSION},
      {"command", "train"},
      {"seed", cfg.seed},
      {"out_dir", out.string()},
      {"inputs",
       {{"source",
         {{"path", opt.source_path}, {"fnv1a64", hash_file(opt.source_path)}}},
        {"target",
         {{"path", opt.target_path},
          {"fnv1a64", hash_file(opt.target_path)}}}}},
      {"config", config_json(cfg)}};
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");

  const TrainState state = train(source, target, cfg);

  write_run_log(state, out / "run.jsonl");
  save_checkpoint(state, (out / "checkpoint.bin").string());
  write_projection(state, source, target, cfg.proto_max_steps,
                   out / "projection.csv");
  if (target.labeled()) {
    const EvalReport report = evaluate(state, target, cfg.proto_max_steps);
    write_text_file(out / "report.txt", format_report(report));
    std::cout << "acc_cn " << report.acc_cn << "\nacc_cp " << report.acc_cp
              << '\n';
  }
  std::cout << "run artifacts in " << out.string() << '\n';
  return 0;
}

struct EvalOptions {
  std::string checkpoint_path;
  std::string target_path;
  std::string out_dir;
  std::string format = "auto";
  int proto_steps = 3;
};

int cmd_eval(const EvalOptions& opt) {
  const TrainState state = load_checkpoint(opt.checkpoint_path);
  const Dataset target = load_features(
      opt.target_path, pick_format(opt.target_path, opt.format),
      DomainTag::target);
  const EvalReport report = evaluate(state, target, opt.proto_steps);
  const std::string text = format_report(report);
  std::cout << text;
  if (!opt.out_dir.empty()) {
    const fs::path out(opt.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
      throw data_error("cannot create output directory " + out.string());
    write_text_file(out / "report.txt", text);
  }
  return 0;
}

struct SynthOptions {
  std::string out_dir;
  std::string format = "csv";
  int n_per_class = 200;
  int classes = 3;
  int dim = 2;
  double shift_x = 0.5;
  double shift_y = 0.5;
  double rotation = 30.0;
  double noise = 0.35;
  unsigned long long seed = 0;
};

int cmd_synth(const SynthOptions& opt) {
  if (opt.classes < 2 || opt.dim < 2 || opt.n_per_class < 1 || opt.noise < 0)
    throw config_error("synthetic task needs classes >= 2, dim >= 2, "
                       "n >= 1 and noise >= 0");
  const auto [source, target] = gen_shifted_gaussians(
      opt.n_per_class, opt.classes, opt.dim, opt.shift_x, opt.shift_y,
      opt.rotation, opt.noise, opt.seed);
  const fs::path out(opt.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw data_error("cannot create output directory " + out.string());
  const bool binary = opt.format == "binary";
  const char* ext = binary ? ".bin" : ".csv";
  const FileFormat format = binary ? FileFormat::binary : FileFormat::csv;
  save_features(source, (out / (std::string("source") + ext)).string(),
                format);
  save_features(target, (out / (std::string("target") + ext)).string(),
                format);
  std::cout << "wrote source" << ext << " and target" << ext << " to "
            << out.string() << '\n';
  return 0;
}

int cmd_gradcheck(unsigned long long seed, int instances) {
  const auto report = gradcheck_suite(seed, instances);
  double worst = 0.0;
  for (const auto& entry : report) {
    std::printf("%-22s %.3e  (%d checks)\n", entry.name.c_str(),
                entry.max_rel_err, entry.instances);
    worst = std::max(worst, entry.max_rel_err);
  }
  if (worst >= 1e-4) {
    std::cerr << "gradient check FAILED: worst error " << worst << '\n';
    return 1;
  }
  std::cout << "all gradients verified (worst " << worst << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial dual-classifier domain adaptation"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  auto* train_cmd =
      app.add_subcommand("train", "pretrain and adapt on a domain pair");
  train_cmd->add_option("--config", train_opt.config_path,
                        "key = value config file");
  train_cmd->add_option("--source", train_opt.source_path,
                        "labeled source features")
      ->required();
  train_cmd->add_option("--target", train_opt.target_path, "target features")
      ->required();
  train_cmd->add_option("--out", train_opt.out_dir, "output directory")
      ->required();
  train_cmd->add_option("--format", train_opt.format, "csv|binary|auto")
      ->check(CLI::IsMember({"csv", "binary", "auto"}));
  train_cmd->add_option("--seed", train_opt.seed, "run seed");
  train_cmd->add_option("--lambda1", train_opt.lambda1,
                        "discrepancy loss weight");
  train_cmd->add_option("--lambda2", train_opt.lambda2,
                        "alignment loss weight");
  train_cmd->add_option("--sigma", train_opt.sigma, "confidence threshold");
  train_cmd->add_option("--lr", train_opt.lr, "adaptation learning rate");
  train_cmd->add_option("--pretrain-lr", train_opt.pretrain_lr,
                        "warm-up learning rate");
  train_cmd->add_option("--iters", train_opt.iters, "adaptation iterations");
  train_cmd->add_option("--pretrain-iters", train_opt.pretrain_iters,
                        "warm-up iterations");
  train_cmd->add_option("--batch", train_opt.batch, "batch size per domain");
  train_cmd->add_option("--projections", train_opt.projections,
                        "sliced Wasserstein directions");
  train_cmd->add_option("--proto-steps", train_opt.proto_steps,
                        "prototype refinement passes");
  train_cmd->add_option("--hidden", train_opt.hidden,
                        "generator hidden width");
  train_cmd->add_option("--embed", train_opt.embed, "embedding width");
  train_cmd->add_option("--temperature", train_opt.temperature,
                        "prototype softmax temperature");
  train_cmd->add_option("--dropout-retain", train_opt.dropout_retain,
                        "dropout keep probability");
  train_cmd->add_option("--eval-every", train_opt.eval_every,
                        "evaluation interval (0 = off)");
  train_cmd
      ->add_option("--ablate", train_opt.ablate,
                   "disable a component: dis|m|em|same|source")
      ->delimiter(',');

  EvalOptions eval_opt;
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on labeled data");
  eval_cmd->add_option("--checkpoint", eval_opt.checkpoint_path,
                       "training checkpoint")
      ->required();
  eval_cmd->add_option("--target", eval_opt.target_path,
                       "labeled evaluation features")
      ->required();
  eval_cmd->add_option("--out", eval_opt.out_dir,
                       "directory for report.txt (optional)");
  eval_cmd->add_option("--format", eval_opt.format, "csv|binary|auto")
      ->check(CLI::IsMember({"csv", "binary", "auto"}));
  eval_cmd->add_option("--proto-steps", eval_opt.proto_steps,
                       "prototype refinement passes");

  SynthOptions synth_opt;
  auto* synth_cmd = app.add_subcommand(
      "synth", "generate a shifted-Gaussian domain pair");
  synth_cmd->add_option("--out", synth_opt.out_dir, "output directory")
      ->required();
  synth_cmd->add_option("--format", synth_opt.format, "csv|binary")
      ->check(CLI::IsMember({"csv", "binary"}));
  synth_cmd->add_option("--n", synth_opt.n_per_class, "samples per class");
  synth_cmd->add_option("--classes", synth_opt.classes, "number of classes");
  synth_cmd->add_option("--dim", synth_opt.dim, "feature dimension");
  synth_cmd->add_option("--shift-x", synth_opt.shift_x, "target shift x");
  synth_cmd->add_option("--shift-y", synth_opt.shift_y, "target shift y");
  synth_cmd->add_option("--rotation", synth_opt.rotation,
                        "target rotation in degrees");
  synth_cmd->add_option("--noise", synth_opt.noise, "isotropic noise sigma");
  synth_cmd->add_option("--seed", synth_opt.seed, "generator seed");

  unsigned long long gradcheck_seed = 20240817ULL;
  int gradcheck_instances = 20;
  auto* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "finite-difference check of every op and loss");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "probe seed");
  gradcheck_cmd->add_option("--instances", gradcheck_instances,
                            "random cases per op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opt);
    if (eval_cmd->parsed()) return cmd_eval(eval_opt);
    if (synth_cmd->parsed()) return cmd_synth(synth_opt);
    if (gradcheck_cmd->parsed())
      return cmd_gradcheck(gradcheck_seed, gradcheck_instances);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
