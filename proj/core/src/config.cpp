#include "uda/config.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

#include "uda/errors.hpp"

namespace uda {

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const std::string& key, std::string_view value) {
  T out{};
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw config_error("bad value '" + std::string(value) + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw config_error("bad value '" + std::string(value) + "' for " + key +
                     " (expected true/false)");
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& raw) {
  const std::string value{trimmed(raw)};
  if (key == "lambda1")
    cfg.lambda1 = parse_number<double>(key, value);
  else if (key == "lambda2")
    cfg.lambda2 = parse_number<double>(key, value);
  else if (key == "sigma")
    cfg.sigma = parse_number<double>(key, value);
  else if (key == "lr")
    cfg.lr = parse_number<double>(key, value);
  else if (key == "pretrain_lr")
    cfg.pretrain_lr = parse_number<double>(key, value);
  else if (key == "pretrain_iters")
    cfg.pretrain_iters = parse_number<long>(key, value);
  else if (key == "train_iters")
    cfg.train_iters = parse_number<long>(key, value);
  else if (key == "batch_size")
    cfg.batch_size = parse_number<int>(key, value);
  else if (key == "num_projections")
    cfg.num_projections = parse_number<int>(key, value);
  else if (key == "proto_max_steps")
    cfg.proto_max_steps = parse_number<int>(key, value);
  else if (key == "temperature")
    cfg.temperature = parse_number<double>(key, value);
  else if (key == "hidden_dim")
    cfg.hidden_dim = parse_number<int>(key, value);
  else if (key == "embed_dim")
    cfg.embed_dim = parse_number<int>(key, value);
  else if (key == "dropout_retain")
    cfg.dropout_retain = parse_number<double>(key, value);
  else if (key == "eval_every")
    cfg.eval_every = parse_number<long>(key, value);
  else if (key == "seed")
    cfg.seed = parse_number<unsigned long long>(key, value);
  else if (key == "disable_dis")
    cfg.ablation.disable_dis = parse_bool(key, value);
  else if (key == "disable_m")
    cfg.ablation.disable_m = parse_bool(key, value);
  else if (key == "disable_em")
    cfg.ablation.disable_em = parse_bool(key, value);
  else if (key == "same_classifier_variant")
    cfg.ablation.same_classifier_variant = parse_bool(key, value);
  else if (key == "source_only")
    cfg.ablation.source_only = parse_bool(key, value);
  else
    throw config_error("unknown config key '" + key + "'");
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trimmed(line);
    if (body.empty() || body.front() == '#') continue;
    if (body.front() == '[') {
      if (body.back() != ']')
        throw config_error(path + ": line " + std::to_string(line_no) +
                           ": unterminated section header");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw config_error(path + ": line " + std::to_string(line_no) +
                         ": expected key = value");
    const std::string key{trimmed(body.substr(0, eq))};
    const std::string value{trimmed(body.substr(eq + 1))};
    try {
      apply_config_entry(cfg, key, value);
    } catch (const config_error& e) {
      throw config_error(path + ": line " + std::to_string(line_no) + ": " +
                         e.what());
    }
  }
}

}  // namespace uda
