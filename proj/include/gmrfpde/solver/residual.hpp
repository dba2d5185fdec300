#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "gmrfpde/fem/assembly.hpp"
#include "gmrfpde/fem/constraints.hpp"
#include "gmrfpde/fem/space.hpp"

namespace gmrfpde::solver {

/// Nonlinear observation map f: ℝᴺ → ℝᴹ with analytic sparse Jacobian. The
/// Jacobian sparsity pattern is identical at every evaluation point so that
/// the Gauss-Newton matrix can reuse one symbolic factorization. Evaluations
/// are pure.
struct NonlinearResidual {
  Index input_dim = 0;
  Index output_dim = 0;
  std::function<Vector(const Vector&)> eval;
  std::function<SparseMatrixCSC(const Vector&)> jacobian;
  Vector noise_precision;  // diagonal, length output_dim
  Vector target;           // y, length output_dim
};

enum class TimeScheme { kImplicitEuler, kCrankNicolson };

/// Wraps a fixed linear map as a NonlinearResidual (f(u) = A u, target b);
/// Gauss-Newton is exact in one step on these.
template <typename LinearOp>
NonlinearResidual linear_residual(const LinearOp& op) {
  NonlinearResidual res;
  res.input_dim = op.A.ncols;
  res.output_dim = op.A.nrows;
  res.noise_precision = op.noise_precision;
  res.target = op.b;
  SparseMatrixCSC a = op.A;
  res.eval = [a](const Vector& u) { return matvec(a, u); };
  res.jacobian = [a](const Vector&) { return a; };
  return res;
}

/// A collocation site for spatiotemporal residuals: the time interval it
/// belongs to and its spatial location.
struct CollocationSite {
  Index interval = 0;
  Real x = 0.0;
};

namespace detail {

struct BurgersCollocationData {
  Vector t_grid;
  Index n_space = 0;
  Real nu = 0.0;
  TimeScheme scheme = TimeScheme::kImplicitEuler;
  std::vector<CollocationSite> sites;
  SparseMatrixCSC e0, e1, e2;  // folded evaluation matrices, one row per site
};

inline Vector slice_of(const Vector& u, Index slice, Index n) {
  return Vector(u.begin() + slice * n, u.begin() + (slice + 1) * n);
}

}  // namespace detail

/// Viscous Burgers' residual on the joint space-time state, one row per
/// collocation site. The time derivative is the finite difference between
/// the neighbouring slices; the advection u·∂ₓu and diffusion ν ∂²ₓu are
/// evaluated at the right slice (implicit Euler) or averaged over both
/// (Crank-Nicolson). The Jacobian is assembled analytically with a fixed
/// pattern (advection contributes φ_j ∂ₓu + u ∂ₓφ_j).
inline NonlinearResidual burgers_collocation_residual(
    const fem::FeSpace& space, const Vector& t_grid, const fem::ConstraintSet& cs,
    Real nu, const std::vector<CollocationSite>& sites, TimeScheme scheme,
    Real noise_prec) {
  require(space.dim() == 1, "burgers: one-dimensional problems only");
  require(space.order() >= 2, "burgers collocation: needs quadratic elements for ∂²ₓ");
  require(t_grid.size() >= 2, "burgers: need at least two time slices");
  Index n_steps = static_cast<Index>(t_grid.size()) - 1;
  for (const CollocationSite& s : sites)
    require(s.interval >= 0 && s.interval < n_steps, "burgers: site interval out of range");

  auto data = std::make_shared<detail::BurgersCollocationData>();
  data->t_grid = t_grid;
  data->n_space = space.n_dofs();
  data->nu = nu;
  data->scheme = scheme;
  data->sites = sites;

  std::vector<Real> pts;
  pts.reserve(sites.size());
  for (const CollocationSite& s : sites) pts.push_back(s.x);
  SparseMatrixCSC t_fold = cs.fold_matrix(space.n_dofs());
  data->e0 = multiply(fem::eval_basis(space, pts, {0, 0}), t_fold);
  data->e1 = multiply(fem::eval_basis(space, pts, {1, 0}), t_fold);
  data->e2 = multiply(fem::eval_basis(space, pts, {2, 0}), t_fold);

  Index n_rows = static_cast<Index>(sites.size());
  Index n_total = static_cast<Index>(t_grid.size()) * space.n_dofs();

  NonlinearResidual res;
  res.input_dim = n_total;
  res.output_dim = n_rows;
  res.noise_precision.assign(n_rows, noise_prec);
  res.target.assign(n_rows, 0.0);

  res.eval = [data](const Vector& u) {
    Index n = data->n_space;
    Index n_rows = static_cast<Index>(data->sites.size());
    Vector r(n_rows, 0.0);
    // Per-slice evaluation caches.
    Index n_slices = static_cast<Index>(data->t_grid.size());
    std::vector<Vector> v0(n_slices), v1(n_slices), v2(n_slices);
    auto ensure = [&](Index s) {
      if (!v0[s].empty()) return;
      Vector us = detail::slice_of(u, s, n);
      v0[s] = matvec(data->e0, us);
      v1[s] = matvec(data->e1, us);
      v2[s] = matvec(data->e2, us);
    };
    auto pde_term = [&](Index s, Index row) {
      return v0[s][row] * v1[s][row] - data->nu * v2[s][row];
    };
    for (Index row = 0; row < n_rows; ++row) {
      Index i = data->sites[row].interval;
      ensure(i);
      ensure(i + 1);
      Real dt = data->t_grid[i + 1] - data->t_grid[i];
      Real dudt = (v0[i + 1][row] - v0[i][row]) / dt;
      if (data->scheme == TimeScheme::kImplicitEuler)
        r[row] = dudt + pde_term(i + 1, row);
      else
        r[row] = dudt + 0.5 * (pde_term(i + 1, row) + pde_term(i, row));
    }
    return r;
  };

  res.jacobian = [data](const Vector& u) {
    Index n = data->n_space;
    Index n_rows = static_cast<Index>(data->sites.size());
    Index n_total = static_cast<Index>(data->t_grid.size()) * n;
    Index n_slices = static_cast<Index>(data->t_grid.size());
    std::vector<Vector> v0(n_slices), v1(n_slices);
    auto ensure = [&](Index s) {
      if (!v0[s].empty()) return;
      Vector us = detail::slice_of(u, s, n);
      v0[s] = matvec(data->e0, us);
      v1[s] = matvec(data->e1, us);
    };
    std::vector<Triplet> trips;
    // Row-major views of the evaluation matrices make row scatter cheap.
    SparseMatrixCSC e0t = transpose(data->e0);
    SparseMatrixCSC e1t = transpose(data->e1);
    SparseMatrixCSC e2t = transpose(data->e2);
    auto add_row_t = [&](const SparseMatrixCSC& et, Index row, Index slice, Real coeff) {
      for (Index p = et.col_ptr[row]; p < et.col_ptr[row + 1]; ++p)
        trips.push_back({row, slice * n + et.row_idx[p], coeff * et.values[p]});
    };

    for (Index row = 0; row < n_rows; ++row) {
      Index i = data->sites[row].interval;
      ensure(i);
      ensure(i + 1);
      Real dt = data->t_grid[i + 1] - data->t_grid[i];
      Real theta = data->scheme == TimeScheme::kImplicitEuler ? 1.0 : 0.5;

      // d/du^{(i+1)}: E0/dt + θ (diag(E1u)E0 + diag(E0u)E1 - ν E2)
      add_row_t(e0t, row, i + 1, 1.0 / dt + theta * v1[i + 1][row]);
      add_row_t(e1t, row, i + 1, theta * v0[i + 1][row]);
      add_row_t(e2t, row, i + 1, -theta * data->nu);
      // d/du^{(i)}: -E0/dt + (1-θ)(diag(E1u)E0 + diag(E0u)E1 - ν E2)
      Real theta_c = 1.0 - theta;
      add_row_t(e0t, row, i, -1.0 / dt + theta_c * v1[i][row]);
      if (theta_c != 0.0) {
        add_row_t(e1t, row, i, theta_c * v0[i][row]);
        add_row_t(e2t, row, i, -theta_c * data->nu);
      } else {
        // Keep the pattern fixed across schemes' slice-i block anyway.
        add_row_t(e1t, row, i, 0.0);
        add_row_t(e2t, row, i, 0.0);
      }
    }
    return csc_from_triplets(n_rows, n_total, std::move(trips));
  };
  return res;
}

namespace detail {

struct BurgersWeakData {
  Vector t_grid;
  Index n_space = 0;
  Real nu = 0.0;
  TimeScheme scheme = TimeScheme::kImplicitEuler;
  SparseMatrixCSC mass_hat, stiff_hat;  // folded (not row-compressed)
  SparseMatrixCSC t_fold;
  std::vector<Index> kept_rows;
  const fem::FeSpace* space = nullptr;
  std::vector<bool> col_mask;  // true = slack column (zeroed)
};

/// Weak advection term a(v)_i = ∫ φ_i v ∂ₓv and its Jacobian
/// J_ij = ∫ φ_i (φ_j ∂ₓv + v ∂ₓφ_j) for 1D spaces, physical coefficients.
inline void weak_advection(const fem::FeSpace& space, const Vector& v, Vector* a,
                           std::vector<Triplet>* jac) {
  int degree = 3 * space.order();
  auto rule = fem::detail::reference_rule(1, degree);
  Index nd = space.dofs_per_element();
  std::vector<Real> shape(nd), dshape(nd);
  if (a) a->assign(space.n_dofs(), 0.0);
  for (Index e = 0; e < space.mesh().n_elements(); ++e) {
    const Index* dofs = space.element_dofs(e);
    Real h = space.mesh().element_measure(e);
    for (const auto& q : rule) {
      space.shape_values(q.xi, 0.0, {0, 0}, shape.data());
      space.shape_values(q.xi, 0.0, {1, 0}, dshape.data());
      for (Index k = 0; k < nd; ++k) dshape[k] /= h;
      Real vq = 0.0, dvq = 0.0;
      for (Index k = 0; k < nd; ++k) {
        vq += v[dofs[k]] * shape[k];
        dvq += v[dofs[k]] * dshape[k];
      }
      Real w = q.w * h;
      for (Index i = 0; i < nd; ++i) {
        if (a) (*a)[dofs[i]] += w * shape[i] * vq * dvq;
        if (jac)
          for (Index j = 0; j < nd; ++j)
            jac->push_back({dofs[i], dofs[j],
                            w * shape[i] * (shape[j] * dvq + vq * dshape[j])});
      }
    }
  }
}

}  // namespace detail

/// Weak-form (FEM observation) Burgers' residual: per step, rows are the
/// unconstrained test DoFs of
///   M (u⁽ⁱ⁺¹⁾ - u⁽ⁱ⁾)/Δt + θ N(u⁽ⁱ⁺¹⁾) + (1-θ) N(u⁽ⁱ⁾),
/// with N(v) = ν K_Δ v + ∫ φ v ∂ₓv and θ = 1 (implicit Euler) or 1/2
/// (Crank-Nicolson).
inline NonlinearResidual burgers_fem_residual(const fem::FeSpace& space,
                                              const Vector& t_grid,
                                              const fem::ConstraintSet& cs, Real nu,
                                              TimeScheme scheme, Real noise_prec) {
  require(space.dim() == 1, "burgers: one-dimensional problems only");
  require(t_grid.size() >= 2, "burgers: need at least two time slices");

  auto data = std::make_shared<detail::BurgersWeakData>();
  data->t_grid = t_grid;
  data->n_space = space.n_dofs();
  data->nu = nu;
  data->scheme = scheme;
  data->space = &space;
  data->t_fold = cs.fold_matrix(space.n_dofs());
  data->kept_rows = cs.unconstrained_dofs(space.n_dofs());
  {
    SparseMatrixCSC mass = fem::assemble_mass(space);
    SparseMatrixCSC stiff = fem::assemble_stiffness(space, fem::laplace_operator(1.0));
    SparseMatrixCSC tt = transpose(data->t_fold);
    data->col_mask = cs.constrained_mask(space.n_dofs());
    // Slack columns are zeroed so the residual never reads slack coordinates
    // (they are pinned by the prior); the Jacobian masks them identically.
    auto mask_cols = [&](SparseMatrixCSC m) {
      for (Index j = 0; j < m.ncols; ++j)
        if (data->col_mask[j])
          for (Index p = m.col_ptr[j]; p < m.col_ptr[j + 1]; ++p) m.values[p] = 0.0;
      return m;
    };
    data->mass_hat = mask_cols(multiply(multiply(tt, mass), data->t_fold));
    data->stiff_hat = mask_cols(multiply(multiply(tt, stiff), data->t_fold));
  }

  Index n_steps = static_cast<Index>(t_grid.size()) - 1;
  Index rows_per_step = static_cast<Index>(data->kept_rows.size());
  Index n_rows = n_steps * rows_per_step;
  Index n_total = static_cast<Index>(t_grid.size()) * space.n_dofs();

  NonlinearResidual res;
  res.input_dim = n_total;
  res.output_dim = n_rows;
  res.noise_precision.assign(n_rows, noise_prec);
  res.target.assign(n_rows, 0.0);

  res.eval = [data](const Vector& u) {
    Index n = data->n_space;
    Index n_steps = static_cast<Index>(data->t_grid.size()) - 1;
    Index rows_per_step = static_cast<Index>(data->kept_rows.size());
    Real theta = data->scheme == TimeScheme::kImplicitEuler ? 1.0 : 0.5;
    Vector r(n_steps * rows_per_step, 0.0);

    std::vector<Vector> nvec(data->t_grid.size());
    auto weak_n = [&](Index s) -> const Vector& {
      if (!nvec[s].empty()) return nvec[s];
      Vector us = detail::slice_of(u, s, n);
      for (Index i = 0; i < n; ++i)
        if (data->col_mask[i]) us[i] = 0.0;
      Vector phys = matvec(data->t_fold, us);
      Vector adv;
      detail::weak_advection(*data->space, phys, &adv, nullptr);
      Vector diff = matvec(data->stiff_hat, us);
      Vector adv_folded = matvec_transpose(data->t_fold, adv);
      nvec[s].assign(n, 0.0);
      for (Index i = 0; i < n; ++i) nvec[s][i] = data->nu * diff[i] + adv_folded[i];
      return nvec[s];
    };

    for (Index step = 0; step < n_steps; ++step) {
      Real dt = data->t_grid[step + 1] - data->t_grid[step];
      Vector du = detail::slice_of(u, step + 1, n);
      Vector us = detail::slice_of(u, step, n);
      for (Index i = 0; i < n; ++i) du[i] -= us[i];
      Vector mdu = matvec(data->mass_hat, du);
      const Vector& n_next = weak_n(step + 1);
      const Vector& n_cur = weak_n(step);
      for (Index k = 0; k < rows_per_step; ++k) {
        Index dof = data->kept_rows[k];
        r[step * rows_per_step + k] =
            mdu[dof] / dt + theta * n_next[dof] + (1.0 - theta) * n_cur[dof];
      }
    }
    return r;
  };

  res.jacobian = [data](const Vector& u) {
    Index n = data->n_space;
    Index n_steps = static_cast<Index>(data->t_grid.size()) - 1;
    Index rows_per_step = static_cast<Index>(data->kept_rows.size());
    Real theta = data->scheme == TimeScheme::kImplicitEuler ? 1.0 : 0.5;

    std::vector<Index> row_of(n, -1);
    for (Index k = 0; k < rows_per_step; ++k) row_of[data->kept_rows[k]] = k;

    // Per-slice Jacobian of N: ν K̂ + Tᵀ J_adv(Tu) T, folded.
    std::vector<SparseMatrixCSC> jn(data->t_grid.size());
    auto slice_jacobian = [&](Index s) -> const SparseMatrixCSC& {
      if (jn[s].ncols != 0) return jn[s];
      Vector us = detail::slice_of(u, s, n);
      for (Index i = 0; i < n; ++i)
        if (data->col_mask[i]) us[i] = 0.0;
      Vector phys = matvec(data->t_fold, us);
      std::vector<Triplet> adv_trips;
      detail::weak_advection(*data->space, phys, nullptr, &adv_trips);
      SparseMatrixCSC j_adv = csc_from_triplets(n, n, std::move(adv_trips));
      SparseMatrixCSC tt = transpose(data->t_fold);
      SparseMatrixCSC folded = multiply(multiply(tt, j_adv), data->t_fold);
      jn[s] = add(scale(data->stiff_hat, data->nu), folded);
      return jn[s];
    };

    std::vector<Triplet> trips;
    auto scatter = [&](Index step, Index slice, const SparseMatrixCSC& mat, Real coeff,
                       bool with_mass, Real mass_coeff) {
      for (Index j = 0; j < n; ++j) {
        if (data->col_mask[j]) continue;
        for (Index p = mat.col_ptr[j]; p < mat.col_ptr[j + 1]; ++p) {
          Index k = row_of[mat.row_idx[p]];
          if (k < 0) continue;
          trips.push_back({step * rows_per_step + k, slice * n + j, coeff * mat.values[p]});
        }
        if (with_mass)
          for (Index p = data->mass_hat.col_ptr[j]; p < data->mass_hat.col_ptr[j + 1]; ++p) {
            Index k = row_of[data->mass_hat.row_idx[p]];
            if (k < 0) continue;
            trips.push_back(
                {step * rows_per_step + k, slice * n + j, mass_coeff * data->mass_hat.values[p]});
          }
      }
    };

    for (Index step = 0; step < n_steps; ++step) {
      Real dt = data->t_grid[step + 1] - data->t_grid[step];
      scatter(step, step + 1, slice_jacobian(step + 1), theta, true, 1.0 / dt);
      scatter(step, step, slice_jacobian(step), 1.0 - theta, true, -1.0 / dt);
    }
    Index n_total = static_cast<Index>(data->t_grid.size()) * n;
    return csc_from_triplets(n_steps * rows_per_step, n_total, std::move(trips));
  };
  return res;
}

/// Residual of the nonlinear elliptic PDE -Δu + u³ = f with homogeneous
/// Dirichlet boundary, in weak form over the unconstrained test DoFs:
///   r(u) = K_Δ u + M̃ u.³ - b_f         (nodally cubed, lumped mass)
/// with analytic Jacobian K_Δ + 3 M̃ diag(u²). The exact-quadrature variant
/// integrates (Σ u_j φ_j)³ instead.
inline NonlinearResidual nonlinear_elliptic_residual(const fem::FeSpace& space,
                                                     const fem::ScalarField& f,
                                                     const fem::ConstraintSet& cs,
                                                     Real noise_prec,
                                                     bool lumped_cubic = true) {
  for (const auto& c : cs.items())
    require(c.terms.empty() && c.offset == 0.0,
            "nonlinear elliptic: only homogeneous Dirichlet constraints supported");

  SparseMatrixCSC stiff = fem::assemble_stiffness(space, fem::laplace_operator(1.0));
  Vector load = fem::assemble_load(space, f);
  fem::FoldedObservation folded = fem::fold_weak_observation(stiff, load, cs);

  struct Data {
    SparseMatrixCSC a;       // compressed folded stiffness
    Vector b;                // compressed load
    std::vector<Index> kept;
    Vector lumped;           // full-length lumped mass
    SparseMatrixCSC mass;    // consistent mass (exact variant)
    std::vector<bool> mask;  // constrained dofs
    const fem::FeSpace* space;
    bool lumped_cubic;
    int quad_degree;
  };
  auto data = std::make_shared<Data>();
  data->a = folded.A;
  data->b = folded.b;
  data->kept = folded.kept_rows;
  data->lumped = fem::lumped_mass_vector(fem::assemble_mass(space));
  data->mask = cs.constrained_mask(space.n_dofs());
  data->space = &space;
  data->lumped_cubic = lumped_cubic;
  data->quad_degree = 4 * space.order();
  if (!lumped_cubic) data->mass = fem::assemble_mass(space);

  Index n_rows = static_cast<Index>(folded.kept_rows.size());
  NonlinearResidual res;
  res.input_dim = space.n_dofs();
  res.output_dim = n_rows;
  res.noise_precision.assign(n_rows, noise_prec);
  res.target.assign(n_rows, 0.0);

  res.eval = [data](const Vector& u) {
    Index n_rows = static_cast<Index>(data->kept.size());
    Vector r = matvec(data->a, u);
    for (Index k = 0; k < n_rows; ++k) r[k] -= data->b[k];
    if (data->lumped_cubic) {
      for (Index k = 0; k < n_rows; ++k) {
        Index dof = data->kept[k];
        r[k] += data->lumped[dof] * u[dof] * u[dof] * u[dof];
      }
      return r;
    }
    // Exact quadrature of the cubic term per element (masked state view).
    const fem::FeSpace& s = *data->space;
    Vector um(u);
    for (Index i = 0; i < s.n_dofs(); ++i)
      if (data->mask[i]) um[i] = 0.0;
    auto rule = fem::detail::reference_rule(s.dim(), data->quad_degree);
    Index nd = s.dofs_per_element();
    std::vector<Real> shape(nd);
    Vector cubic(s.n_dofs(), 0.0);
    for (Index e = 0; e < s.mesh().n_elements(); ++e) {
      Real scale = fem::detail::measure_scale(s.mesh(), e);
      const Index* dofs = s.element_dofs(e);
      for (const auto& q : rule) {
        s.shape_values(q.xi, q.eta, {0, 0}, shape.data());
        Real uq = 0.0;
        for (Index k = 0; k < nd; ++k) uq += um[dofs[k]] * shape[k];
        Real w = q.w * scale * uq * uq * uq;
        for (Index i = 0; i < nd; ++i) cubic[dofs[i]] += w * shape[i];
      }
    }
    for (Index k = 0; k < n_rows; ++k) r[k] += cubic[data->kept[k]];
    return r;
  };

  res.jacobian = [data](const Vector& u) {
    const fem::FeSpace& s = *data->space;
    Index n = s.n_dofs();
    Index n_rows = static_cast<Index>(data->kept.size());
    std::vector<Index> row_of(n, -1);
    for (Index k = 0; k < n_rows; ++k) row_of[data->kept[k]] = k;

    std::vector<Triplet> trips;
    for (Index j = 0; j < n; ++j)
      for (Index p = data->a.col_ptr[j]; p < data->a.col_ptr[j + 1]; ++p)
        trips.push_back({data->a.row_idx[p], j, data->a.values[p]});

    if (data->lumped_cubic) {
      for (Index k = 0; k < n_rows; ++k) {
        Index dof = data->kept[k];
        trips.push_back({k, dof, 3.0 * data->lumped[dof] * u[dof] * u[dof]});
      }
    } else {
      Vector um(u);
      for (Index i = 0; i < n; ++i)
        if (data->mask[i]) um[i] = 0.0;
      auto rule = fem::detail::reference_rule(s.dim(), data->quad_degree);
      Index nd = s.dofs_per_element();
      std::vector<Real> shape(nd);
      for (Index e = 0; e < s.mesh().n_elements(); ++e) {
        Real scale = fem::detail::measure_scale(s.mesh(), e);
        const Index* dofs = s.element_dofs(e);
        for (const auto& q : rule) {
          s.shape_values(q.xi, q.eta, {0, 0}, shape.data());
          Real uq = 0.0;
          for (Index k = 0; k < nd; ++k) uq += um[dofs[k]] * shape[k];
          Real w = 3.0 * q.w * scale * uq * uq;
          for (Index i = 0; i < nd; ++i) {
            Index row = row_of[dofs[i]];
            if (row < 0) continue;
            for (Index j = 0; j < nd; ++j) {
              if (data->mask[dofs[j]]) continue;
              trips.push_back({row, dofs[j], w * shape[i] * shape[j]});
            }
          }
        }
      }
    }
    return csc_from_triplets(n_rows, n, std::move(trips));
  };
  return res;
}

}  // namespace gmrfpde::solver
