#pragma once

#include <cmath>

#include "gmrfpde/core/types.hpp"

namespace gmrfpde::bench {

/// Relative L2 error in percent: 100 · ‖est - truth‖₂ / ‖truth‖₂ over the
/// shared evaluation grid.
inline Real relative_l2_error(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size())
    throw DimensionError("relative_l2_error: size mismatch");
  Real num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Real d = estimate[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  require(den > 0.0, "relative_l2_error: truth has zero norm");
  return 100.0 * std::sqrt(num / den);
}

}  // namespace gmrfpde::bench
