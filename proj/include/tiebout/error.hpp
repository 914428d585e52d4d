#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tiebout {

enum class ErrorCode {
  invalid_argument,
  support_empty,
  rejection_rate_exceeded,
  zero_size_community,
  singular_point,
  assumption_violated,
  empty_community_mean,
  empty_border,
  degenerate_gradient,
  no_convergence,
  assumption2_unverified,
  no_fully_labeled_cell,
  empty_feasible_set,
  cycling_detected,
  non_separable_model,
  validation,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; `code()` is the
// machine-readable part that ends up in reports and CLI exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::invalid_argument, what);
}

}  // namespace tiebout
