#pragma once

#include <stdexcept>
#include <string>

namespace varsched {

// Bad input: malformed files, jobs violating model invariants, or a policy
// breaking its strict-service contract at run time.  CLI exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// An iterative solver stopped without reaching its tolerance.  CLI exit 3.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace varsched
