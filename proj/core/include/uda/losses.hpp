#ifndef UDA_LOSSES_HPP
#define UDA_LOSSES_HPP

#include <span>
#include <vector>

#include "uda/autodiff.hpp"
#include "uda/matrix.hpp"

namespace uda {

/// Target samples whose prototypical prediction clears the confidence
/// threshold, with their pseudo labels. May cover only part of the label
/// space; alignment restricts itself to the classes that survive.
struct ConfidentSubset {
  std::vector<int> indices;          // rows of the target batch kept
  std::vector<int> labels;           // pseudo label per kept row
  std::vector<int> classes_present;  // ascending, unique
};

struct AlignmentTerms {
  NodePtr l_c;
  NodePtr l_d;
  std::vector<int> classes_used;  // confident classes also in the source batch
  bool skipped = false;           // no class overlap: both terms pinned to 0
  bool single_class = false;      // fewer than 2 usable classes: l_d pinned to 0
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_dis = 0.0;
  double l_c = 0.0;
  double l_d = 0.0;
  double l_m = 0.0;  // always l_c - l_d
  double l_em = 0.0;
  bool all_finite() const;
};

// Mean cross-entropy of probability rows against integer labels, with the
// probabilities clamped at 1e-12 before the log.
NodePtr mean_cross_entropy(const NodePtr& probs, std::span<const int> labels);

// Mean cross-entropy of the neural predictions plus mean cross-entropy of
// the prototypical predictions, both against the source labels.
NodePtr source_loss(const NodePtr& y_hat_n, const NodePtr& y_hat_p,
                    std::span<const int> labels);

// M unit-norm direction columns drawn uniformly on the sphere in dim dims.
Matrix draw_projections(int dim, int m, Rng& rng);

// Sliced Wasserstein discrepancy between two n x C probability matrices:
// project rows onto each direction, sort both projected columns, average
// the squared differences over entries and directions. Differentiable
// through the frozen sort permutations.
NodePtr swd(const NodePtr& p, const NodePtr& q, const Matrix& directions);
NodePtr swd(const NodePtr& p, const NodePtr& q, int num_projections, Rng& rng);

// Keep row i with pseudo label argmax iff that max probability exceeds
// sigma (strictly).
ConfidentSubset filter_confident(const Matrix& y_hat_p_t, double sigma);

// l_c: mean over usable classes of || mean z_s(class) - mean z_t(pseudo
// class) ||2. l_d: mean over ordered pairs of distinct usable classes of
// the cross-class counterpart. Usable = confident classes that also appear
// in the source batch.
AlignmentTerms alignment_loss(const NodePtr& z_s, std::span<const int> y_s,
                              const NodePtr& z_t, const ConfidentSubset& subset);

// Mean summed entropy of both classifiers' target predictions.
NodePtr entropy_loss(const NodePtr& y_hat_n_t, const NodePtr& y_hat_p_t);

}  // namespace uda

#endif
