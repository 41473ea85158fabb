#include "uda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "uda/errors.hpp"

namespace uda {

namespace {

constexpr char kMagic[8] = {'U', 'D', 'A', 'D', 'A', 'T', 'A', '1'};

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view cell, const std::string& path, int line) {
  cell = trimmed(cell);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw data_error(path + ": line " + std::to_string(line) +
                     ": non-numeric cell '" + std::string(cell) + "'");
  return value;
}

long parse_label(std::string_view cell, const std::string& path, int line) {
  cell = trimmed(cell);
  long value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw data_error(path + ": line " + std::to_string(line) +
                     ": label must be an integer, got '" + std::string(cell) +
                     "'");
  return value;
}

Dataset finish_dataset(Matrix features, std::vector<int> labels,
                       bool has_labels, DomainTag tag, int class_count,
                       const std::string& path) {
  Dataset ds;
  ds.features = std::move(features);
  ds.domain_tag = tag;
  if (ds.features.rows() < 1) throw data_error(path + ": no data rows");
  if (!ds.features.all_finite())
    throw data_error(path + ": non-finite feature value");
  if (has_labels) {
    int max_label = 0;
    for (int y : labels) max_label = std::max(max_label, y);
    ds.class_count = class_count > 0 ? class_count : max_label + 1;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= ds.class_count)
        throw data_error(path + ": label " + std::to_string(labels[i]) +
                         " at row " + std::to_string(i) + " exceeds " +
                         std::to_string(ds.class_count) + " classes");
    ds.labels = std::move(labels);
  } else {
    ds.class_count = class_count;
  }
  return ds;
}

Dataset load_csv(const std::string& path, DomainTag tag, int class_count) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);

  std::vector<double> values;
  std::vector<int> labels;
  int cols = -1;
  int line_no = 0;
  int labeled_state = 0;  // 0 unknown, 1 labeled, -1 unlabeled
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;

    std::vector<std::string_view> cells;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() < 2)
      throw data_error(path + ": line " + std::to_string(line_no) +
                       ": expected a label and at least one feature");
    if (cols == -1) cols = static_cast<int>(cells.size()) - 1;
    if (static_cast<int>(cells.size()) - 1 != cols)
      throw data_error(path + ": line " + std::to_string(line_no) +
                       ": expected " + std::to_string(cols + 1) +
                       " cells, got " + std::to_string(cells.size()));

    const long y = parse_label(cells[0], path, line_no);
    if (y == -1) {
      if (labeled_state == 1)
        throw data_error(path + ": line " + std::to_string(line_no) +
                         ": unlabeled row in a labeled file");
      labeled_state = -1;
    } else {
      if (y < 0)
        throw data_error(path + ": line " + std::to_string(line_no) +
                         ": negative label " + std::to_string(y));
      if (labeled_state == -1)
        throw data_error(path + ": line " + std::to_string(line_no) +
                         ": labeled row in an unlabeled file");
      labeled_state = 1;
      labels.push_back(static_cast<int>(y));
    }
    for (std::size_t j = 1; j < cells.size(); ++j)
      values.push_back(parse_double(cells[j], path, line_no));
  }

  const int rows = cols > 0 ? static_cast<int>(values.size()) / cols : 0;
  return finish_dataset(Matrix(rows, cols < 0 ? 0 : cols, std::move(values)),
                        std::move(labels), labeled_state == 1, tag, class_count,
                        path);
}

Dataset load_binary(const std::string& path, DomainTag tag, int class_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);

  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw data_error(path + ": not a feature file (bad magic)");

  std::uint64_t n = 0, d = 0, c = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&d), 8);
  in.read(reinterpret_cast<char*>(&c), 8);
  if (!in || n == 0 || d == 0 || n > (1ULL << 32) || d > (1ULL << 32))
    throw data_error(path + ": corrupt header");

  std::vector<std::int64_t> raw_labels(n);
  in.read(reinterpret_cast<char*>(raw_labels.data()),
          static_cast<std::streamsize>(n * 8));
  std::vector<double> values(n * d);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(n * d * 8));
  if (!in) throw data_error(path + ": truncated feature file");

  bool any_labeled = false, any_unlabeled = false;
  std::vector<int> labels;
  for (std::int64_t y : raw_labels) {
    if (y == -1)
      any_unlabeled = true;
    else if (y >= 0) {
      any_labeled = true;
      labels.push_back(static_cast<int>(y));
    } else
      throw data_error(path + ": negative label " + std::to_string(y));
  }
  if (any_labeled && any_unlabeled)
    throw data_error(path + ": mixes labeled and unlabeled rows");

  return finish_dataset(
      Matrix(static_cast<int>(n), static_cast<int>(d), std::move(values)),
      std::move(labels), any_labeled, tag,
      class_count > 0 ? class_count : static_cast<int>(c), path);
}

}  // namespace

Dataset load_features(const std::string& path, FileFormat format,
                      DomainTag tag, int class_count) {
  return format == FileFormat::csv ? load_csv(path, tag, class_count)
                                   : load_binary(path, tag, class_count);
}

void save_features(const Dataset& ds, const std::string& path,
                   FileFormat format) {
  if (format == FileFormat::csv) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    char buf[64];
    for (int i = 0; i < ds.size(); ++i) {
      out << (ds.labels ? (*ds.labels)[i] : -1);
      for (int j = 0; j < ds.dim(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
        out << ',' << buf;
      }
      out << '\n';
    }
    if (!out) throw data_error("write failed for " + path);
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path);
  out.write(kMagic, 8);
  const std::uint64_t n = ds.size(), d = ds.dim(),
                      c = static_cast<std::uint64_t>(ds.class_count);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  out.write(reinterpret_cast<const char*>(&c), 8);
  for (int i = 0; i < ds.size(); ++i) {
    const std::int64_t y = ds.labels ? (*ds.labels)[i] : -1;
    out.write(reinterpret_cast<const char*>(&y), 8);
  }
  out.write(reinterpret_cast<const char*>(ds.features.data().data()),
            static_cast<std::streamsize>(n * d * 8));
  if (!out) throw data_error("write failed for " + path);
}

std::pair<Dataset, Dataset> gen_shifted_gaussians(int n_per_class, int classes,
                                                  int dim, double shift_x,
                                                  double shift_y,
                                                  double rotation_deg,
                                                  double noise_sigma,
                                                  unsigned long long seed) {
  if (classes < 2) throw domain_error("gen_shifted_gaussians: need C >= 2");
  if (dim < 2) throw domain_error("gen_shifted_gaussians: need d >= 2");
  if (n_per_class < 1)
    throw domain_error("gen_shifted_gaussians: need n_per_class >= 1");
  if (noise_sigma < 0.0)
    throw domain_error("gen_shifted_gaussians: negative noise");

  const double radius = 1.0;
  const double theta = rotation_deg * std::numbers::pi / 180.0;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto make_domain = [&](bool shifted, DomainTag tag) {
    Dataset ds;
    ds.features = Matrix(n_per_class * classes, dim);
    ds.labels = std::vector<int>(n_per_class * classes);
    ds.domain_tag = tag;
    ds.class_count = classes;
    for (int c = 0; c < classes; ++c) {
      const double angle = 2.0 * std::numbers::pi * c / classes;
      double cx = radius * std::cos(angle);
      double cy = radius * std::sin(angle);
      if (shifted) {
        const double rx = cx * std::cos(theta) - cy * std::sin(theta);
        const double ry = cx * std::sin(theta) + cy * std::cos(theta);
        cx = rx + shift_x;
        cy = ry + shift_y;
      }
      for (int i = 0; i < n_per_class; ++i) {
        const int row = c * n_per_class + i;
        (*ds.labels)[row] = c;
        ds.features(row, 0) = cx;
        ds.features(row, 1) = cy;
        if (noise_sigma > 0.0)
          for (int j = 0; j < dim; ++j)
            ds.features(row, j) += noise_sigma * noise(rng);
      }
    }
    return ds;
  };

  Dataset source = make_domain(false, DomainTag::source);
  Dataset target = make_domain(true, DomainTag::target);
  return {std::move(source), std::move(target)};
}

BatchIterator::BatchIterator(int n, int batch_size, unsigned long long seed)
    : n_(n), batch_size_(batch_size), permutation_(n), rng_(seed) {
  if (n < 1) throw domain_error("batch iterator over an empty dataset");
  if (batch_size < 1) throw domain_error("batch size must be >= 1");
  std::iota(permutation_.begin(), permutation_.end(), 0);
  reshuffle();
}

void BatchIterator::reshuffle() {
  std::shuffle(permutation_.begin(), permutation_.end(), rng_);
}

std::vector<int> BatchIterator::next() {
  if (cursor_ >= n_) {
    reshuffle();
    cursor_ = 0;
  }
  const int take = std::min(batch_size_, n_ - cursor_);
  std::vector<int> batch(permutation_.begin() + cursor_,
                         permutation_.begin() + cursor_ + take);
  cursor_ += take;
  return batch;
}

std::string BatchIterator::serialize_state() const {
  std::ostringstream os;
  os << n_ << ' ' << batch_size_ << ' ' << cursor_;
  for (int idx : permutation_) os << ' ' << idx;
  os << ' ' << rng_;
  return os.str();
}

void BatchIterator::restore_state(const std::string& state) {
  std::istringstream is(state);
  int n = 0, batch = 0, cursor = 0;
  is >> n >> batch >> cursor;
  if (!is || n != n_ || batch != batch_size_ || cursor < 0 || cursor > n_)
    throw data_error("batch iterator state does not match the dataset");
  std::vector<int> perm(n_);
  for (int& idx : perm) {
    is >> idx;
    if (!is || idx < 0 || idx >= n_)
      throw data_error("corrupt batch iterator permutation");
  }
  Rng rng;
  is >> rng;
  if (!is) throw data_error("corrupt batch iterator generator state");
  cursor_ = cursor;
  permutation_ = std::move(perm);
  rng_ = rng;
}

std::pair<Matrix, std::optional<std::vector<int>>> next_batch(
    BatchIterator& it, const Dataset& ds) {
  if (it.dataset_size() != ds.size())
    throw contract_error("batch iterator bound to a different dataset size");
  const auto indices = it.next();
  Matrix features(static_cast<int>(indices.size()), ds.dim());
  for (std::size_t k = 0; k < indices.size(); ++k)
    for (int j = 0; j < ds.dim(); ++j)
      features(static_cast<int>(k), j) = ds.features(indices[k], j);
  std::optional<std::vector<int>> labels;
  if (ds.labels) {
    labels.emplace();
    labels->reserve(indices.size());
    for (int idx : indices) labels->push_back((*ds.labels)[idx]);
  }
  return {std::move(features), std::move(labels)};
}

}  // namespace uda
