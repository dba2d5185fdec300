#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

/// Deterministic random stream. Normal variates use an explicit Box-Muller on
/// top of mt19937_64 so sequences are identical across standard libraries
/// (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Real uniform() {
    // 53-bit mantissa uniform in (0, 1).
    return (static_cast<Real>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  Real normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    Real u1 = uniform();
    Real u2 = uniform();
    Real r = std::sqrt(-2.0 * std::log(u1));
    Real theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Vector normal_vector(Index n) {
    Vector z(n);
    for (Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  Real spare_ = 0.0;
};

}  // namespace gmrfpde
