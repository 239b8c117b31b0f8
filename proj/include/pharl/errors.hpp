#pragma once

#include <stdexcept>
#include <string>

namespace pharl {

// Bad input: malformed files, config mistakes, violated preconditions.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure while computing: degenerate geometry, divergence, I/O trouble.
// The CLI maps this to exit code 2.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pharl
