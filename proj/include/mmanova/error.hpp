#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmanova {

/// Failure categories raised by the library. The CLI maps these onto exit codes.
enum class Errc {
  invalid_argument,
  not_positive_definite,
  non_convergence,
  all_zero,
  invalid_dof,
  invalid_dims,
  unbalanced,
  non_orthogonal,
  insufficient_dof,
  degenerate_basis,
  rejection_exhausted,
  zero_dof,
  empty,
  length_mismatch,
  insufficient_n,
  invalid_sizes,
  missing_covariance,
  parse,
  io,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::not_positive_definite: return "NotPositiveDefinite";
    case Errc::non_convergence: return "NonConvergence";
    case Errc::all_zero: return "AllZero";
    case Errc::invalid_dof: return "InvalidDof";
    case Errc::invalid_dims: return "InvalidDims";
    case Errc::unbalanced: return "Unbalanced";
    case Errc::non_orthogonal: return "NonOrthogonal";
    case Errc::insufficient_dof: return "InsufficientDof";
    case Errc::degenerate_basis: return "DegenerateBasis";
    case Errc::rejection_exhausted: return "RejectionExhausted";
    case Errc::zero_dof: return "ZeroDof";
    case Errc::empty: return "Empty";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::insufficient_n: return "InsufficientN";
    case Errc::invalid_sizes: return "InvalidSizes";
    case Errc::missing_covariance: return "MissingCovariance";
    case Errc::parse: return "Parse";
    case Errc::io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmanova
