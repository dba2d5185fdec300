#pragma once

#include <cmath>
#include <utility>

#include "gmrfpde/fem/assembly.hpp"
#include "gmrfpde/fem/constraints.hpp"
#include "gmrfpde/fem/space.hpp"
#include "gmrfpde/gmrf.hpp"

namespace gmrfpde::priors {

/// Whittle-Matérn SPDE field (κ² - Δ)^{α/2} u = τ⁻¹-scaled white noise, with
/// integer α = ν + d/2. Effective range r maps to κ = √(8ν)/r.
struct MaternSpec {
  Real kappa = 1.0;
  int alpha = 2;
  Real tau = 1.0;

  void validate() const {
    require(kappa > 0.0, "matern: kappa must be positive");
    require(alpha >= 1, "matern: alpha must be an integer >= 1");
    require(tau > 0.0, "matern: tau must be positive");
  }
};

inline Real matern_kappa_from_range(Real range, int alpha, int dim) {
  require(range > 0.0, "matern: range must be positive");
  Real nu = alpha - 0.5 * dim;
  require(nu > 0.0, "matern: alpha too small for this dimension (nu <= 0)");
  return std::sqrt(8.0 * nu) / range;
}

/// τ giving unit stationary marginal variance. With τ multiplying the white
/// noise, σ² = τ² Γ(ν) / (Γ(α) (4π)^{d/2} κ^{2ν}), so the calibrated value is
/// the inverse square root of the unit-noise variance.
inline Real matern_tau_for_unit_variance(Real kappa, int alpha, int dim) {
  Real nu = alpha - 0.5 * dim;
  require(nu > 0.0, "matern: variance formula requires nu > 0");
  Real sigma2_unit = std::tgamma(nu) /
                     (std::tgamma(static_cast<Real>(alpha)) *
                      std::pow(4.0 * M_PI, 0.5 * dim) * std::pow(kappa, 2.0 * nu));
  return 1.0 / std::sqrt(sigma2_unit);
}

/// GMRF approximation of the Matérn field on a FEM space. The discrete
/// operator is K = κ²M + K_Δ; with lumped mass M̃ the precision is
///   Q = (1/τ²) Kᵀ M̃⁻¹ K                        (α = 1, 2)
///   Q_α = Kᵀ M̃⁻¹ Q_{α-2} M̃⁻¹ K                 (α >= 3)
/// and a left square root composes as L = (1/τ) Kᵀ M̃^{-1/2} at the base and
/// L_α = Kᵀ M̃⁻¹ L_{α-2} above it. Constraints fold (K, M) before any
/// products, which pins constrained DoFs to independent N(0, ε²) slacks.
inline Gmrf matern_prior(const fem::FeSpace& space, const MaternSpec& spec,
                         const fem::ConstraintSet& cs = {}) {
  spec.validate();
  SparseMatrixCSC mass = fem::assemble_mass(space);
  fem::DifferentialOperatorSpec op;
  op.diffusion = 1.0;
  SparseMatrixCSC k = fem::assemble_stiffness(space, op);
  k = add(k, mass, 1.0, spec.kappa * spec.kappa);

  auto [k_hat, m_hat] = fem::apply_constraints_precision_pair(k, mass, cs);
  Vector lumped = fem::lumped_mass_vector(m_hat);
  Vector inv_lumped(lumped), inv_sqrt_lumped(lumped);
  for (std::size_t i = 0; i < lumped.size(); ++i) {
    inv_lumped[i] = 1.0 / lumped[i];
    inv_sqrt_lumped[i] = 1.0 / std::sqrt(lumped[i]);
  }

  SparseMatrixCSC kt = transpose(k_hat);
  SparseMatrixCSC kt_minv = scale_cols(kt, inv_lumped);  // Kᵀ M̃⁻¹

  SparseMatrixCSC q = scale(multiply(kt_minv, k_hat), 1.0 / (spec.tau * spec.tau));
  SparseMatrixCSC sqrt_l = scale(scale_cols(kt, inv_sqrt_lumped), 1.0 / spec.tau);
  for (int a = spec.alpha; a >= 3; a -= 2) {
    q = multiply(kt_minv, multiply(q, transpose(kt_minv)));
    sqrt_l = multiply(kt_minv, sqrt_l);
  }
  return Gmrf(Vector(space.n_dofs(), 0.0), symmetrize(q), std::move(sqrt_l));
}

}  // namespace gmrfpde::priors
