#ifndef UDA_DATA_HPP
#define UDA_DATA_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uda/matrix.hpp"

namespace uda {

enum class DomainTag { source, target };

struct Dataset {
  Matrix features;  // n x d
  std::optional<std::vector<int>> labels;
  DomainTag domain_tag = DomainTag::source;
  int class_count = 0;

  int size() const { return features.rows(); }
  int dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }
};

enum class FileFormat { csv, binary };

// CSV rows: integer label first (-1 = unlabeled), then the feature values.
// A file that is -1 throughout loads with labels absent; mixing labeled and
// unlabeled rows is a parse error. The binary format carries the same
// schema behind a magic header. class_count 0 means infer from the labels.
Dataset load_features(const std::string& path, FileFormat format,
                      DomainTag tag = DomainTag::source, int class_count = 0);
void save_features(const Dataset& ds, const std::string& path,
                   FileFormat format);

// Labeled source and target with a controlled covariate shift: class
// centers sit on a circle of radius 3 in the first two coordinates (zeros
// elsewhere); target centers are rotated by rotation_deg and translated by
// shift before the same isotropic noise gets applied.
std::pair<Dataset, Dataset> gen_shifted_gaussians(int n_per_class, int classes,
                                                  int dim, double shift_x,
                                                  double shift_y,
                                                  double rotation_deg,
                                                  double noise_sigma,
                                                  unsigned long long seed);

/// Epoch-shuffled index stream. Every epoch visits each index exactly once;
/// the final short batch of an epoch is emitted before reshuffling.
class BatchIterator {
 public:
  BatchIterator(int n, int batch_size, unsigned long long seed);

  std::vector<int> next();

  int dataset_size() const { return n_; }
  int batch_size() const { return batch_size_; }

  // Checkpoint access: the full iteration state round-trips exactly.
  std::string serialize_state() const;
  void restore_state(const std::string& state);

 private:
  void reshuffle();

  int n_;
  int batch_size_;
  int cursor_ = 0;
  std::vector<int> permutation_;
  Rng rng_;
};

// The next batch's features (and labels when present) under the iterator's
// epoch permutation.
std::pair<Matrix, std::optional<std::vector<int>>> next_batch(
    BatchIterator& it, const Dataset& ds);

}  // namespace uda

#endif
