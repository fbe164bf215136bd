#ifndef SPM_ERRORS_HPP
#define SPM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spm {

// Error categories map to CLI exit codes: config 2, data 3, numeric 4.

// Invalid or inconsistent configuration (bad parameter values, shape
// mismatches between artifacts the user wired together).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, malformed or corrupted input files.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: singular systems, non-converged solvers.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spm

#endif
