#ifndef UDA_EVAL_HPP
#define UDA_EVAL_HPP

#include <span>
#include <string>
#include <vector>

#include "uda/data.hpp"
#include "uda/matrix.hpp"
#include "uda/trainer.hpp"

namespace uda {

struct EvalReport {
  double acc_cn = 0.0;
  double acc_cp = 0.0;            // headline metric
  double acc_cp_unrefined = 0.0;  // prototypes as trained, before refinement
  std::vector<double> per_class_cn;
  std::vector<double> per_class_cp;
  Matrix confusion_cn;  // C x C counts, row = ground truth
  Matrix confusion_cp;
  int n_eval = 0;
};

// Dropout-free accuracy of both heads on a labeled target set. The
// prototypical head refines its prototypes on the evaluation embeddings
// for proto_max_steps passes; the pre-refinement accuracy is kept too.
EvalReport evaluate(const TrainState& state, const Dataset& target,
                    int proto_max_steps = 3);

struct PcaResult {
  Matrix coords;            // n x 2
  bool degenerate = false;  // zero-variance input, coords all zero
};

// Center and project onto the top two principal directions. Each
// direction's largest-magnitude entry is made positive so the output is
// reproducible across runs.
PcaResult pca_project(const Matrix& z);

std::string format_report(const EvalReport& report);

// Rows {x, y, domain, label, pred}; domain 0 = source, 1 = target,
// label -1 = unlabeled.
void write_projection_csv(const std::string& path, const Matrix& coords,
                          std::span<const int> domains,
                          std::span<const int> labels,
                          std::span<const int> preds);

}  // namespace uda

#endif
