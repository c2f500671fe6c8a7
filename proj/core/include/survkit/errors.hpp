#pragma once

#include <stdexcept>
#include <string>

namespace survkit {

// Bad or contract-violating input: malformed CSV, unknown column, empty
// dataset, invalid hyperparameter. The CLI maps this to exit code 2.
class input_error : public std::runtime_error {
public:
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure in an otherwise well-posed problem: non-convergence,
// monotone likelihood, singular information matrix. CLI exit code 3.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace survkit
