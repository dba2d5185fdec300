#pragma once

#include <cmath>
#include <functional>

#include "gmrfpde/core/types.hpp"

namespace gmrfpde::bench {

/// Manufactured truth for the nonlinear elliptic problem -Δu + u³ = f on the
/// unit square with zero boundary values:
///   u(x) = Σ_{k=1}^{k_max} k⁻⁶ sin(kπx₁) sin(kπx₂),
/// f assembled analytically for the Laplacian part and pointwise for u³.
/// Modes beyond k decay like k⁻⁶, so small truncations approximate the full
/// series: the tail beyond k_max contributes less than Σ_{k>k_max} k⁻⁶.
struct ManufacturedElliptic {
  int k_max;

  explicit ManufacturedElliptic(int k) : k_max(k) {
    require(k >= 1, "manufactured elliptic: k_max must be >= 1");
  }

  Real truth(Real x, Real y) const {
    Real u = 0.0;
    for (int k = 1; k <= k_max; ++k)
      u += std::sin(k * M_PI * x) * std::sin(k * M_PI * y) / std::pow(k, 6);
    return u;
  }

  Real forcing(Real x, Real y) const {
    Real lap = 0.0;
    for (int k = 1; k <= k_max; ++k)
      lap += 2.0 * k * k * M_PI * M_PI * std::sin(k * M_PI * x) * std::sin(k * M_PI * y) /
             std::pow(k, 6);
    Real u = truth(x, y);
    return lap + u * u * u;
  }

  std::function<Real(const Real*)> truth_field() const {
    int k = k_max;
    return [k](const Real* x) {
      ManufacturedElliptic m(k);
      return m.truth(x[0], x[1]);
    };
  }

  std::function<Real(const Real*)> forcing_field() const {
    int k = k_max;
    return [k](const Real* x) {
      ManufacturedElliptic m(k);
      return m.forcing(x[0], x[1]);
    };
  }

  /// Upper bound on the sup-norm contribution of the truncated tail.
  Real tail_bound() const {
    Real s = 0.0;
    for (int k = k_max + 1; k <= k_max + 100000; ++k) {
      Real term = 1.0 / std::pow(k, 6);
      s += term;
      if (term < 1e-18) break;
    }
    return s;
  }
};

}  // namespace gmrfpde::bench
