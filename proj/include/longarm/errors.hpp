#pragma once

#include <stdexcept>
#include <string>

namespace longarm {

/// A precondition on user-supplied input was violated. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical guard tripped (non-convergence, broken monotonicity). Maps to CLI exit code 3.
class NumericalGuard : public std::runtime_error {
 public:
  explicit NumericalGuard(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace longarm
