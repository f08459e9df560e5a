#pragma once

#include <stdexcept>
#include <string>

namespace picert {

// Base class for all library errors so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of a scalar map or certificate formula.
struct DomainError : Error {
  using Error::Error;
};

// Inversion target not reachable within the bracket growth cap.
struct UnreachableError : Error {
  using Error::Error;
};

// A map claimed to satisfy map(s) <= s was caught increasing a value.
struct NotContractiveError : Error {
  using Error::Error;
};

// Action not admissible at the queried state.
struct AdmissibilityError : Error {
  using Error::Error;
};

// Discounted cost accumulation diverges along a trajectory.
struct DivergentCostError : Error {
  using Error::Error;
};

// Policy evaluation has no finite solution.
struct EvaluationDivergesError : Error {
  using Error::Error;
};

// Initial policy has non-finite cost somewhere; policy iteration cannot start.
struct InfeasibleInitialPolicyError : Error {
  using Error::Error;
};

// No exponential-cost certificate could be fitted to the supplied policy.
struct NoCertificateError : Error {
  using Error::Error;
};

// No discount threshold below one satisfies the stabilizing-margin inequality.
struct NoStabilizingDiscountError : Error {
  using Error::Error;
};

// Discount factor outside the certified interval for the requested bound.
struct DiscountRangeError : Error {
  using Error::Error;
};

// Closed-form iteration-threshold formula evaluated outside its domain.
struct FormulaDomainError : Error {
  using Error::Error;
};

// Matrix dimensions inconsistent with the declared system shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Bad command-line usage or malformed configuration input.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace picert
