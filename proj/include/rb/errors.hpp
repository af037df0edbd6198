#pragma once

#include <stdexcept>
#include <string>

namespace rb {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geometry / operator domain violations (kappa out of range, |v| >= 1, v_m == 0, ...)
struct DomainError : Error {
  using Error::Error;
};
// query at a point of the singular set (gradient undefined)
struct SingularPoint : Error {
  using Error::Error;
};

// flight-level faults; the random layer resamples the whole event on these
struct SingularHit : Error {
  using Error::Error;
};
struct TrappedTrajectory : Error {
  using Error::Error;
};
struct StalledMarch : Error {
  using Error::Error;
};

struct ResampleBudgetExceeded : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};
struct StuckAtBoundary : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace rb
