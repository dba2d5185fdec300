#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/fem/assembly.hpp"
#include "gmrfpde/fem/constraints.hpp"
#include "gmrfpde/gmrf.hpp"
#include "gmrfpde/priors/matern.hpp"

namespace gmrfpde::priors {

/// Spatiotemporal SPDE ∂u/∂t + L_s[u] = τ W(t, x), discretized by implicit
/// Euler in time and FEM in space. The spatiotemporal noise is white in time
/// and spatially a Matérn field (its GMRF supplies both Σ⁻¹ and a square
/// root); the initial slice is a Matérn GMRF.
struct SpatiotemporalSpec {
  Vector t_grid;
  fem::DifferentialOperatorSpec spatial_op;
  MaternSpec noise_spec;
  Real tau = 1.0;
  MaternSpec initial_spec;

  void validate() const {
    require(t_grid.size() >= 2, "spatiotemporal: need at least two time points");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
      require(t_grid[i] > t_grid[i - 1], "spatiotemporal: time grid must increase strictly");
    require(tau > 0.0, "spatiotemporal: tau must be positive");
  }
};

/// Joint prior over the stacked time slices. The precision is block
/// tridiagonal with per-step transition A_i = G_i⁻¹ M (G_i = M + Δt_i K,
/// never densified) and conditional noise F_i. All blocks are expanded into
/// sparse products of G_i, the lumped mass and the spatial-noise precision:
///   A_iᵀ F_i⁻¹ A_i = T_i · M M̃⁻¹ Q_W M̃⁻¹ M,
///   A_iᵀ F_i⁻¹     = T_i · M M̃⁻¹ Q_W M̃⁻¹ G_i,
///   F_i⁻¹          = T_i · G_iᵀ M̃⁻¹ Q_W M̃⁻¹ G_i,        T_i := 1/(Δt_i τ²).
/// The square root is block bidiagonal with wide blocks
///   [L_{Q1} | √T_0·M M̃⁻¹ L_W], rows below carrying -√T_i·G_iᵀ M̃⁻¹ L_W.
struct SpatiotemporalPrior {
  Vector t_grid;
  Index n_space = 0;
  SparseMatrixCSC m_hat;                     // constrained mass
  std::vector<SparseMatrixCSC> transition_g; // G_i per step
  std::vector<SparseMatrixCSC> f_inv_sqrt;   // F_i^{-1/2} = √T_i Gᵀ M̃⁻¹ L_W
  SparseMatrixCSC q1;
  SparseMatrixCSC joint_precision;
  SparseMatrixCSC joint_sqrt;

  Index n_steps() const { return static_cast<Index>(t_grid.size()) - 1; }
  Index joint_dim() const { return n_space * static_cast<Index>(t_grid.size()); }

  /// Deterministic one-step evolution u ↦ A_i u = G_i⁻¹ M u. Only available
  /// when G_i is symmetric (pure diffusion/reaction dynamics).
  Vector apply_transition(Index step, const Vector& u) const {
    const SparseMatrixCSC& g = transition_g[step];
    require(is_symmetric(g, 1e-10),
            "apply_transition: G is not symmetric (advective dynamics)");
    CholeskyFactor f = cholesky_factor(symmetrize(g));
    return solve(f, matvec(m_hat, u));
  }
};

namespace detail {

inline void append_block(std::vector<Triplet>& trips, const SparseMatrixCSC& block,
                         Index row_offset, Index col_offset, Real scale) {
  for (Index j = 0; j < block.ncols; ++j)
    for (Index p = block.col_ptr[j]; p < block.col_ptr[j + 1]; ++p)
      trips.push_back({block.row_idx[p] + row_offset, j + col_offset,
                       scale * block.values[p]});
}

}  // namespace detail

inline std::pair<SpatiotemporalPrior, Gmrf> spatiotemporal_prior(
    const fem::FeSpace& space, const SpatiotemporalSpec& spec,
    const fem::ConstraintSet& cs = {}) {
  spec.validate();
  Index n = space.n_dofs();
  Index n_t = static_cast<Index>(spec.t_grid.size());
  Index n_steps = n_t - 1;

  SparseMatrixCSC mass = fem::assemble_mass(space);
  SparseMatrixCSC k = fem::assemble_stiffness(space, spec.spatial_op);
  auto [k_hat, m_hat] = fem::apply_constraints_precision_pair(k, mass, cs);

  Gmrf noise = matern_prior(space, spec.noise_spec, cs);
  Gmrf initial = matern_prior(space, spec.initial_spec, cs);
  const SparseMatrixCSC& q_w = noise.precision();
  const SparseMatrixCSC& l_w = noise.sqrt();

  Vector lumped = fem::lumped_mass_vector(m_hat);
  Vector inv_lumped(lumped);
  for (Real& v : inv_lumped) v = 1.0;
  for (std::size_t i = 0; i < lumped.size(); ++i) inv_lumped[i] = 1.0 / lumped[i];

  // W1 = M M̃⁻¹ (columns scaled);  V_i = M̃⁻¹ G_i (rows scaled).
  SparseMatrixCSC w1 = scale_cols(m_hat, inv_lumped);
  SparseMatrixCSC w1_qw = multiply(w1, q_w);
  SparseMatrixCSC c_mm = multiply(w1_qw, transpose(w1));
  SparseMatrixCSC s_m = multiply(w1, l_w);  // unscaled √T factor applied later

  bool uniform = true;
  Real dt0 = spec.t_grid[1] - spec.t_grid[0];
  for (Index i = 1; i < n_steps; ++i)
    if (std::abs((spec.t_grid[i + 1] - spec.t_grid[i]) - dt0) > 1e-12 * dt0) uniform = false;

  SpatiotemporalPrior prior;
  prior.t_grid = spec.t_grid;
  prior.n_space = n;
  prior.m_hat = m_hat;
  prior.q1 = initial.precision();

  std::vector<Triplet> q_trips;
  std::vector<Triplet> sqrt_trips;
  Index sqrt_cols = 0;

  // Initial block: Q_1 contribution and its square-root sub-block.
  detail::append_block(q_trips, initial.precision(), 0, 0, 1.0);
  detail::append_block(sqrt_trips, initial.sqrt(), 0, 0, 1.0);
  sqrt_cols += initial.sqrt().ncols;

  SparseMatrixCSC g_cached, v_cached, c_gg_cached, c_mg_cached, f_is_cached;
  for (Index i = 0; i < n_steps; ++i) {
    Real dt = spec.t_grid[i + 1] - spec.t_grid[i];
    Real t_i = 1.0 / (dt * spec.tau * spec.tau);
    Real sqrt_t = std::sqrt(t_i);

    if (!uniform || i == 0) {
      g_cached = add(m_hat, k_hat, 1.0, dt);
      v_cached = scale_rows(inv_lumped, g_cached);
      SparseMatrixCSC vt_qw = multiply(transpose(v_cached), q_w);
      c_gg_cached = multiply(vt_qw, v_cached);
      c_mg_cached = multiply(w1_qw, v_cached);
      f_is_cached = multiply(transpose(v_cached), l_w);
    }
    prior.transition_g.push_back(g_cached);
    prior.f_inv_sqrt.push_back(scale(f_is_cached, sqrt_t));

    Index row_i = i * n, row_ip1 = (i + 1) * n;
    // Diagonal contributions: A_iᵀF_i⁻¹A_i at slice i, F_i⁻¹ at slice i+1.
    detail::append_block(q_trips, c_mm, row_i, row_i, t_i);
    detail::append_block(q_trips, c_gg_cached, row_ip1, row_ip1, t_i);
    // Off-diagonal blocks -A_iᵀF_i⁻¹ and its transpose.
    detail::append_block(q_trips, c_mg_cached, row_i, row_ip1, -t_i);
    detail::append_block(q_trips, transpose(c_mg_cached), row_ip1, row_i, -t_i);

    // Square-root column block i: +√T_i·S_M on slice i, -F_i^{-1/2} below.
    detail::append_block(sqrt_trips, s_m, row_i, sqrt_cols, sqrt_t);
    detail::append_block(sqrt_trips, f_is_cached, row_ip1, sqrt_cols, -sqrt_t);
    sqrt_cols += l_w.ncols;
  }

  Index joint_n = n_t * n;

  // Constrained (slack) coordinates are exactly decoupled from the physical
  // ones, but the telescoped blocks would assign them precisions scaled by
  // 1/(ε⁴ ε_W²), which poisons objective evaluations downstream. Replace the
  // slack time-chain with the independent per-slice N(0, ε²) the constraint
  // semantics ask for; their square-root columns are pure slack columns, so
  // the swap is exact.
  if (!cs.empty()) {
    std::vector<bool> mask = cs.constrained_mask(n);
    auto is_slack_coord = [&](Index coord) { return mask[coord % n]; };
    std::vector<Triplet> q_kept;
    q_kept.reserve(q_trips.size());
    for (const Triplet& t : q_trips)
      if (!is_slack_coord(t.row) && !is_slack_coord(t.col)) q_kept.push_back(t);
    std::vector<Triplet> sqrt_kept;
    sqrt_kept.reserve(sqrt_trips.size());
    for (const Triplet& t : sqrt_trips)
      if (!is_slack_coord(t.row)) sqrt_kept.push_back(t);
    for (const fem::LinearConstraint& c : cs.items()) {
      for (Index s = 0; s < n_t; ++s) {
        Index coord = s * n + c.constrained;
        q_kept.push_back({coord, coord, 1.0 / c.noise_var});
        sqrt_kept.push_back({coord, sqrt_cols, 1.0 / std::sqrt(c.noise_var)});
        ++sqrt_cols;
      }
    }
    q_trips = std::move(q_kept);
    sqrt_trips = std::move(sqrt_kept);
  }

  prior.joint_precision =
      symmetrize(csc_from_triplets(joint_n, joint_n, std::move(q_trips)));
  prior.joint_sqrt = csc_from_triplets(joint_n, sqrt_cols, std::move(sqrt_trips));

  Gmrf flat(Vector(joint_n, 0.0), prior.joint_precision, prior.joint_sqrt);
  return {std::move(prior), std::move(flat)};
}

/// Spatial operator of the linearized advection-diffusion proxy
/// L_s[u] = c·∇u - ν Δu, used to build physics-informed priors.
inline fem::DifferentialOperatorSpec linear_proxy_operator(const std::vector<Real>& c,
                                                           Real nu) {
  require(nu >= 0.0, "linear proxy: nu must be nonnegative");
  fem::DifferentialOperatorSpec op;
  op.diffusion = nu;
  bool zero_c = true;
  for (Real v : c)
    if (v != 0.0) zero_c = false;
  if (!zero_c) op.advection = c;
  return op;
}

/// Average of a scalar field over the mesh (the bulk advection speed of the
/// proxy is the average initial value).
inline Real average_value(const fem::FeSpace& space, const fem::ScalarField& f) {
  Vector load = fem::assemble_load(space, f);
  Real integral = 0.0;
  for (Real v : load) integral += v;
  Real measure = 0.0;
  for (Index e = 0; e < space.mesh().n_elements(); ++e)
    measure += space.mesh().element_measure(e);
  return integral / measure;
}

}  // namespace gmrfpde::priors
