#include "uda/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "uda/errors.hpp"

namespace uda {

namespace {

constexpr char kMagic[8] = {'U', 'D', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint64_t kVersion = 1;

struct Writer {
  std::ofstream out;

  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw data_error("cannot write " + path);
  }
  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void matrix(const Matrix& m) {
    i64(m.rows());
    i64(m.cols());
    bytes(m.data().data(), m.size() * sizeof(double));
  }
  void string(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::ifstream in;
  std::string path;

  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw data_error("cannot open " + p);
  }
  void bytes(void* out, std::size_t n) {
    if (!in.read(static_cast<char*>(out), static_cast<std::streamsize>(n)))
      throw data_error(path + ": truncated checkpoint");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  Matrix matrix() {
    const auto r = i64();
    const auto c = i64();
    if (r < 0 || c < 0 || r > (1 << 28) || c > (1 << 28))
      throw data_error(path + ": corrupt matrix header");
    Matrix m(static_cast<int>(r), static_cast<int>(c));
    bytes(m.data().data(), m.size() * sizeof(double));
    return m;
  }
  std::string string() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw data_error(path + ": corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

void write_params(Writer& w, const std::vector<NodePtr>& params) {
  for (const auto& p : params) w.matrix(p->value);
}

void read_params(Reader& r, const std::vector<NodePtr>& params) {
  for (const auto& p : params) {
    Matrix m = r.matrix();
    if (!m.same_shape(p->value))
      throw data_error(r.path + ": weight shape " + shape_string(m) +
                       " does not match architecture " +
                       shape_string(p->value));
    p->value = std::move(m);
    p->zero_grad();
  }
}

void write_adam(Writer& w, const AdamState& adam) {
  w.f64(adam.lr);
  w.i64(adam.t);
  for (const auto& m : adam.m) w.matrix(m);
  for (const auto& v : adam.v) w.matrix(v);
}

void read_adam(Reader& r, AdamState& adam) {
  adam.lr = r.f64();
  adam.t = r.i64();
  for (auto& m : adam.m) m = r.matrix();
  for (auto& v : adam.v) v = r.matrix();
}

void write_counts(Writer& w, const std::vector<long>& counts) {
  w.u64(counts.size());
  for (long c : counts) w.i64(c);
}

std::vector<long> read_counts(Reader& r) {
  const auto n = r.u64();
  if (n > (1ULL << 32)) throw data_error(r.path + ": corrupt count length");
  std::vector<long> counts(n);
  for (auto& c : counts) c = static_cast<long>(r.i64());
  return counts;
}

// Iterator states embed the dataset and batch sizes as their first two
// fields; reconstruction parses them back out.
BatchIterator rebuild_iterator(const std::string& state,
                               const std::string& path) {
  std::istringstream is(state);
  int n = 0, batch = 0;
  if (!(is >> n >> batch) || n < 1 || batch < 1)
    throw data_error(path + ": corrupt batch iterator state");
  BatchIterator it(n, batch, 0);
  it.restore_state(state);
  return it;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  Writer w(path);
  w.bytes(kMagic, 8);
  w.u64(kVersion);

  const auto& g = state.generator;
  w.i64(g.layer1.weight->value.rows());
  w.i64(g.layer1.weight->value.cols());
  w.i64(g.layer2.weight->value.cols());
  w.i64(state.classifier.layer2.weight->value.cols());
  w.f64(g.dropout_retain);
  w.u64(state.second_classifier ? 1 : 0);
  w.i64(state.iteration);

  write_params(w, g.params());
  write_params(w, state.classifier.params());
  if (state.second_classifier)
    write_params(w, state.second_classifier->params());
  write_adam(w, state.adam_g);
  write_adam(w, state.adam_cn);
  if (state.adam_cp) write_adam(w, *state.adam_cp);

  w.matrix(state.prototypes.mu);
  w.f64(state.prototypes.temperature);
  write_counts(w, state.prototypes.source_counts);
  write_counts(w, state.prototypes.target_counts);

  std::ostringstream rng_text;
  rng_text << state.rng;
  w.string(rng_text.str());
  w.string(state.source_batches.serialize_state());
  w.string(state.target_batches.serialize_state());

  w.u64(state.loss_history.size());
  for (const auto& rec : state.loss_history) {
    w.i64(rec.iter);
    w.f64(rec.losses.l_s);
    w.f64(rec.losses.l_dis);
    w.f64(rec.losses.l_c);
    w.f64(rec.losses.l_d);
    w.f64(rec.losses.l_m);
    w.f64(rec.losses.l_em);
    w.i64(rec.n_confident);
    w.u64(rec.classes_present.size());
    for (int c : rec.classes_present) w.i64(c);
  }
  w.u64(state.metric_history.size());
  for (const auto& rec : state.metric_history) {
    w.i64(rec.iter);
    w.f64(rec.acc_cn);
    w.f64(rec.acc_cp);
  }
  if (!w.out) throw data_error("write failed for " + path);
}

TrainState load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw data_error(path + ": not a checkpoint (bad magic)");
  if (r.u64() != kVersion)
    throw data_error(path + ": unsupported checkpoint version");

  const auto input_dim = static_cast<int>(r.i64());
  const auto hidden_dim = static_cast<int>(r.i64());
  const auto embed_dim = static_cast<int>(r.i64());
  const auto classes = static_cast<int>(r.i64());
  const double dropout_retain = r.f64();
  const bool has_second = r.u64() != 0;
  const auto iteration = static_cast<long>(r.i64());
  if (input_dim < 1 || hidden_dim < 1 || embed_dim < 1 || classes < 2 ||
      dropout_retain <= 0.0 || dropout_retain > 1.0)
    throw data_error(path + ": corrupt architecture header");

  Rng scratch(0);
  GeneratorNet generator(input_dim, hidden_dim, embed_dim, dropout_retain,
                         scratch);
  NeuralClassifier classifier(embed_dim, classes, scratch);
  std::optional<NeuralClassifier> second;
  if (has_second) second.emplace(embed_dim, classes, scratch);

  read_params(r, generator.params());
  read_params(r, classifier.params());
  if (second) read_params(r, second->params());

  AdamState adam_g(generator.params(), 1.0);
  AdamState adam_cn(classifier.params(), 1.0);
  std::optional<AdamState> adam_cp;
  if (second) adam_cp.emplace(second->params(), 1.0);
  read_adam(r, adam_g);
  read_adam(r, adam_cn);
  if (adam_cp) read_adam(r, *adam_cp);

  Prototypes prototypes;
  prototypes.mu = r.matrix();
  prototypes.temperature = r.f64();
  prototypes.source_counts = read_counts(r);
  prototypes.target_counts = read_counts(r);
  if (prototypes.mu.rows() != classes || prototypes.mu.cols() != embed_dim)
    throw data_error(path + ": prototype shape does not match architecture");

  Rng rng;
  {
    std::istringstream is(r.string());
    is >> rng;
    if (!is) throw data_error(path + ": corrupt generator state");
  }
  BatchIterator source_batches = rebuild_iterator(r.string(), path);
  BatchIterator target_batches = rebuild_iterator(r.string(), path);

  const auto n_loss = r.u64();
  if (n_loss > (1ULL << 28)) throw data_error(path + ": corrupt history length");
  std::vector<IterationRecord> loss_history(n_loss);
  for (auto& rec : loss_history) {
    rec.iter = static_cast<long>(r.i64());
    rec.losses.l_s = r.f64();
    rec.losses.l_dis = r.f64();
    rec.losses.l_c = r.f64();
    rec.losses.l_d = r.f64();
    rec.losses.l_m = r.f64();
    rec.losses.l_em = r.f64();
    rec.n_confident = static_cast<int>(r.i64());
    const auto n_classes = r.u64();
    if (n_classes > (1ULL << 20))
      throw data_error(path + ": corrupt class list");
    rec.classes_present.resize(n_classes);
    for (auto& c : rec.classes_present) c = static_cast<int>(r.i64());
  }
  const auto n_metric = r.u64();
  if (n_metric > (1ULL << 28))
    throw data_error(path + ": corrupt history length");
  std::vector<EvalRecord> metric_history(n_metric);
  for (auto& rec : metric_history) {
    rec.iter = static_cast<long>(r.i64());
    rec.acc_cn = r.f64();
    rec.acc_cp = r.f64();
  }

  return TrainState{std::move(generator),
                    std::move(classifier),
                    std::move(second),
                    std::move(prototypes),
                    std::move(adam_g),
                    std::move(adam_cn),
                    std::move(adam_cp),
                    iteration,
                    rng,
                    std::move(source_batches),
                    std::move(target_batches),
                    std::move(loss_history),
                    std::move(metric_history)};
}

}  // namespace uda
