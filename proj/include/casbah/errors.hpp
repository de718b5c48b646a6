#pragma once

#include <stdexcept>
#include <string>

namespace casbah {

// Bad user input: malformed files, invalid parameter values, dimension
// mismatches. The CLI maps this to exit code 2.
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unrecoverable numerical failure (indefinite matrix after repair, etc.).
// The CLI maps this to exit code 3.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace casbah
