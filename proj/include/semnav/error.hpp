#pragma once
#include <stdexcept>
#include <string>

namespace semnav {

// Input file failed to parse or failed schema checks.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A structural invariant does not hold; the message names the invariant.
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Procedural generation could not satisfy its constraints within the
// bounded retry budget.
struct GenerationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace semnav
