#pragma once

#include <stdexcept>
#include <string>

namespace iselab {

// Thrown when an iterative numerical routine cannot reach its requested
// tolerance.  Carries the best error estimate achieved so callers can decide
// whether the partial result is still usable.
class numerical_failure : public std::runtime_error {
 public:
  numerical_failure(const std::string& what, double achieved_error)
      : std::runtime_error(what + " (achieved error estimate " +
                           std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}

  double achieved_error() const { return achieved_error_; }

 private:
  double achieved_error_;
};

// Thrown when a sampler or enumerator exceeds a configured work bound
// (attempt caps, exploration caps, table size caps).
class resource_limit : public std::runtime_error {
 public:
  explicit resource_limit(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace iselab
