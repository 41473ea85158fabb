#ifndef UDA_PROTO_HPP
#define UDA_PROTO_HPP

#include <span>
#include <vector>

#include "uda/autodiff.hpp"
#include "uda/matrix.hpp"

namespace uda {

/// Class prototypes for the parameter-free classifier: one mean embedding
/// per class. A class that receives no samples in an update keeps its
/// previous row; it is never zeroed.
struct Prototypes {
  Matrix mu;  // C x d_embed
  std::vector<long> source_counts;
  std::vector<long> target_counts;
  double temperature = 1.0;

  int classes() const { return mu.rows(); }
  int dim() const { return mu.cols(); }
};

// Probability rows: softmax over classes of cos(z_i, mu_c) / temperature.
// Differentiable with respect to z only; prototypes enter as constants.
// Zero-norm sample or prototype rows are domain errors.
NodePtr proto_predict(const Prototypes& p, const NodePtr& z);

// Prototypes from labeled source embeddings: mu[c] = mean of class c rows.
// Every class in 0..class_count-1 must appear at least once.
Prototypes init_from_source(const Matrix& z_s, std::span<const int> y_s,
                            int class_count, double temperature = 1.0);

// Replace the rows of classes present in this batch with the batch class
// means; absent classes keep their prototypes.
void refresh_from_batch(Prototypes& p, const Matrix& z_s,
                        std::span<const int> y_s);

struct RefineResult {
  Prototypes prototypes;
  std::vector<int> labels;  // pseudo labels from the final pass
  Matrix probabilities;     // predictions of the final pass
  int passes = 0;           // assignment passes run, including the one that
                            // confirms a fixed point
  bool converged = false;
};

// Alternate between assigning pseudo labels by cosine argmax and moving
// each nonempty class's prototype to its assigned mean, for at most
// max_steps assignment passes or until assignments repeat.
RefineResult refine_on_target(const Prototypes& p, const Matrix& z_t,
                              int max_steps = 3);

}  // namespace uda

#endif
