#include "tiebout/error.hpp"

namespace tiebout {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::support_empty: return "support-empty";
    case ErrorCode::rejection_rate_exceeded: return "rejection-rate-exceeded";
    case ErrorCode::zero_size_community: return "zero-size-community";
    case ErrorCode::singular_point: return "singular-point";
    case ErrorCode::assumption_violated: return "assumption-violated";
    case ErrorCode::empty_community_mean: return "empty-community-mean";
    case ErrorCode::empty_border: return "empty-border";
    case ErrorCode::degenerate_gradient: return "degenerate-gradient";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::assumption2_unverified: return "assumption-2-unverified";
    case ErrorCode::no_fully_labeled_cell: return "no-fully-labeled-cell";
    case ErrorCode::empty_feasible_set: return "empty-feasible-set";
    case ErrorCode::cycling_detected: return "cycling-detected";
    case ErrorCode::non_separable_model: return "non-separable-model";
    case ErrorCode::validation: return "validation";
  }
  return "unknown";
}

}  // namespace tiebout
