#pragma once

#include <cmath>
#include <vector>

#include "gmrfpde/core/quadrature.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde::bench {

/// Exact solution of viscous Burgers' on [-1, 1] with u(x, 0) = -sin(πx) and
/// zero Dirichlet ends, via the Cole-Hopf transformation evaluated by
/// Gauss-Hermite quadrature:
///   u(x,t) = 2√(ν/t) · Σ w_i z_i g(x - 2√(νt) z_i) / Σ w_i g(x - 2√(νt) z_i),
/// with g(η) = exp(-F₀(η)/2ν) and F₀(η) = (cos(πη) - 1)/π the antiderivative
/// of the initial condition. Oddness about x ∈ {-1, 0, 1} keeps the whole-line
/// formula exact for the Dirichlet problem.
class ColeHopfReference {
 public:
  explicit ColeHopfReference(Real nu, Index n_quadrature = 160)
      : nu_(nu), rule_(gauss_hermite(n_quadrature)) {
    require(nu > 0.0, "cole-hopf: viscosity must be positive");
    require(n_quadrature >= 8, "cole-hopf: need at least 8 quadrature nodes");
  }

  Real operator()(Real x, Real t) const {
    if (t <= 0.0) return -std::sin(M_PI * x);
    Real s = 2.0 * std::sqrt(nu_ * t);
    std::size_t n = rule_.points.size();
    // Exponent shift keeps the ratio finite for small viscosities.
    Real emax = -1e300;
    std::vector<Real> expo(n);
    for (std::size_t i = 0; i < n; ++i) {
      Real eta = x - s * rule_.points[i];
      expo[i] = -(std::cos(M_PI * eta) - 1.0) / (M_PI * 2.0 * nu_);
      emax = std::max(emax, expo[i]);
    }
    Real num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Real w = rule_.weights[i] * std::exp(expo[i] - emax);
      num += w * rule_.points[i];
      den += w;
    }
    return 2.0 * std::sqrt(nu_ / t) * num / den;
  }

  Real nu() const { return nu_; }

 private:
  Real nu_;
  QuadratureRule rule_;
};

/// Solution values on a space-time grid (row-major over t then x). The result
/// is self-convergence checked: doubling the quadrature order must move the
/// values by less than 1e-8, otherwise the quadrature has not converged.
inline Vector reference_cole_hopf(Real nu, const Vector& x_grid, const Vector& t_grid,
                                  Index n_quadrature = 160) {
  ColeHopfReference coarse(nu, n_quadrature);
  ColeHopfReference fine(nu, 2 * n_quadrature);
  Vector out(x_grid.size() * t_grid.size());
  Real max_diff = 0.0;
  for (std::size_t it = 0; it < t_grid.size(); ++it)
    for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
      Real a = coarse(x_grid[ix], t_grid[it]);
      Real b = fine(x_grid[ix], t_grid[it]);
      max_diff = std::max(max_diff, std::abs(a - b));
      out[it * x_grid.size() + ix] = b;
    }
  if (max_diff >= 1e-8)
    throw NumericalError(
        "cole-hopf: quadrature not converged (doubling moved values by " +
        std::to_string(max_diff) + "); increase n_quadrature");
  return out;
}

}  // namespace gmrfpde::bench
