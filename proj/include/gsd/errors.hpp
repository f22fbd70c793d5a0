#ifndef GSD_ERRORS_HPP
#define GSD_ERRORS_HPP

#include <stdexcept>

namespace gsd {

// An iterative linear solver stopped before reaching its tolerance.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The requested regularizer supports objective evaluation only.
struct UnsupportedSolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A node's adaptive stepsize is undefined (zero weight over its whole
// closed neighborhood).
struct DegenerateNodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered mid-computation, e.g. a diverged loss.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem or parse failure for datasets, signals and reports.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gsd

#endif  // GSD_ERRORS_HPP
