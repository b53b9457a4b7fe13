#pragma once

#include <stdexcept>
#include <string>

namespace pdhams {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition violation on user input.
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite value in a log-probability or acceptance computation.
struct NumericGuardError : Error {
  using Error::Error;
};

/// Calibration design does not identify W.
struct RankDeficiencyError : Error {
  using Error::Error;
};

/// Exact enumeration would exceed the configured budget.
struct EnumerationBudgetError : Error {
  using Error::Error;
};

/// Factorization breakdown (W + lambda I not positive definite).
struct CalibrationError : Error {
  using Error::Error;
};

/// State outside the support of a distribution it is conditioned on.
struct InvalidStateError : Error {
  using Error::Error;
};

/// Between-chain variance is zero, so T*W/B has no finite value.
struct UndefinedEssError : Error {
  using Error::Error;
};

/// Series with zero variance where a normalized statistic was requested.
struct ZeroVarianceError : Error {
  using Error::Error;
};

/// Two probability tables defined over different supports.
struct SupportMismatchError : Error {
  using Error::Error;
};

/// Caller broke an API contract (e.g. W mismatch for the Gibbs kernel).
struct ContractError : Error {
  using Error::Error;
};

}  // namespace pdhams
