#ifndef UDA_ERRORS_HPP
#define UDA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace uda {

// Shape disagreement between operands (reports both shapes).
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input outside an operation's mathematical domain (log of non-positive,
// zero-norm vector fed to a cosine, empty class at prototype init).
struct domain_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent data: unparsable files, labels out of range,
// corrupt checkpoints, missing inputs.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad hyperparameter, unknown key, unreadable config).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: backward on a non-scalar, optimizer/parameter mismatch.
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN/Inf detected during training; carries the iteration it surfaced at.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what, long iteration = -1)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

}  // namespace uda

#endif
