#pragma once

#include <cmath>
#include <functional>

#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/fem/assembly.hpp"
#include "gmrfpde/fem/constraints.hpp"
#include "gmrfpde/solver/residual.hpp"

namespace gmrfpde::bench {

/// Deterministic Crank-Nicolson time-marching solver for viscous Burgers',
/// used as an independent reference for problems without a closed form. Each
/// step solves the constrained weak-form system with Newton iterations. The
/// route (sequential stepping + per-step Newton) is independent of the
/// space-time Gauss-Newton path it is used to judge.
class BurgersMarchingSolver {
 public:
  BurgersMarchingSolver(const fem::FeSpace& space, const fem::ConstraintSet& cs, Real nu)
      : space_(space), cs_(cs), nu_(nu) {
    mass_ = fem::assemble_mass(space);
    stiff_ = fem::assemble_stiffness(space, fem::laplace_operator(1.0));
    t_fold_ = cs.fold_matrix(space.n_dofs());
    mask_ = cs.constrained_mask(space.n_dofs());
  }

  /// Marches from the nodal initial condition over the given time grid and
  /// returns all slices stacked (row-major over time).
  Vector march(const Vector& u0, const Vector& t_grid) const {
    Index n = space_.n_dofs();
    Index n_t = static_cast<Index>(t_grid.size());
    Vector out(n_t * n, 0.0);
    Vector u = u0;
    for (Index i = 0; i < n; ++i)
      if (mask_[i]) u[i] = 0.0;
    std::copy(u.begin(), u.end(), out.begin());

    for (Index step = 0; step + 1 < n_t; ++step) {
      Real dt = t_grid[step + 1] - t_grid[step];
      u = advance(u, dt);
      std::copy(u.begin(), u.end(), out.begin() + (step + 1) * n);
    }
    return out;
  }

 private:
  Vector weak_n(const Vector& u) const {
    Vector phys = matvec(t_fold_, u);
    Vector adv;
    solver::detail::weak_advection(space_, phys, &adv, nullptr);
    Vector folded = matvec_transpose(t_fold_, adv);
    Vector diff = matvec(stiff_hat(), u);
    for (std::size_t i = 0; i < folded.size(); ++i) folded[i] = nu_ * diff[i] + folded[i];
    return folded;
  }

  const SparseMatrixCSC& stiff_hat() const {
    if (stiff_hat_.ncols == 0) {
      SparseMatrixCSC tt = transpose(t_fold_);
      stiff_hat_ = multiply(multiply(tt, stiff_), t_fold_);
      mask_columns(stiff_hat_);
    }
    return stiff_hat_;
  }

  const SparseMatrixCSC& mass_hat() const {
    if (mass_hat_.ncols == 0) {
      SparseMatrixCSC tt = transpose(t_fold_);
      mass_hat_ = multiply(multiply(tt, mass_), t_fold_);
      mask_columns(mass_hat_);
    }
    return mass_hat_;
  }

  void mask_columns(SparseMatrixCSC& m) const {
    for (Index j = 0; j < m.ncols; ++j)
      if (mask_[j])
        for (Index p = m.col_ptr[j]; p < m.col_ptr[j + 1]; ++p) m.values[p] = 0.0;
  }

  /// One Crank-Nicolson step: solve for u⁺ in
  ///   M(u⁺ - u)/dt + (N(u⁺) + N(u))/2 = 0 over the unconstrained dofs.
  Vector advance(const Vector& u, Real dt) const {
    Index n = space_.n_dofs();
    Vector n_old = weak_n(u);
    Vector x = u;  // warm start
    std::vector<Index> kept = cs_.unconstrained_dofs(n);
    std::vector<Index> row_of(n, -1);
    for (std::size_t k = 0; k < kept.size(); ++k) row_of[kept[k]] = static_cast<Index>(k);

    for (int newton = 0; newton < 30; ++newton) {
      Vector n_new = weak_n(x);
      Vector mdiff = matvec(mass_hat(), vec_sub(x, u));
      Vector residual(kept.size());
      Real rnorm = 0.0;
      for (std::size_t k = 0; k < kept.size(); ++k) {
        residual[k] = mdiff[kept[k]] / dt + 0.5 * (n_new[kept[k]] + n_old[kept[k]]);
        rnorm += residual[k] * residual[k];
      }
      if (std::sqrt(rnorm) < 1e-12) break;

      Vector phys = matvec(t_fold_, x);
      std::vector<Triplet> adv_trips;
      solver::detail::weak_advection(space_, phys, nullptr, &adv_trips);
      SparseMatrixCSC j_adv = csc_from_triplets(n, n, std::move(adv_trips));
      SparseMatrixCSC tt = transpose(t_fold_);
      SparseMatrixCSC folded = multiply(multiply(tt, j_adv), t_fold_);
      SparseMatrixCSC jac =
          add(add(mass_hat(), stiff_hat(), 1.0 / dt, 0.5 * nu_), folded, 1.0, 0.5);
      // Reduce to the unconstrained block and insert unit rows elsewhere.
      std::vector<Triplet> sys;
      for (Index col = 0; col < n; ++col) {
        if (mask_[col]) continue;
        for (Index p = jac.col_ptr[col]; p < jac.col_ptr[col + 1]; ++p) {
          Index r = row_of[jac.row_idx[p]];
          if (r < 0) continue;
          sys.push_back({r, row_of[col], jac.values[p]});
        }
      }
      Index m = static_cast<Index>(kept.size());
      SparseMatrixCSC sys_m = csc_from_triplets(m, m, std::move(sys));
      // Newton systems of Burgers' CN steps are nonsymmetric (advection);
      // solve the normal equations of the small reduced system instead.
      SparseMatrixCSC st = transpose(sys_m);
      SparseMatrixCSC normal = symmetrize(multiply(st, sys_m));
      Vector rhs = matvec_transpose(sys_m, residual);
      Vector delta = solve_triangular(cholesky_factor(normal), rhs, TriangularMode::kFull);
      for (std::size_t k = 0; k < kept.size(); ++k) x[kept[k]] -= delta[k];
    }
    return x;
  }

  const fem::FeSpace& space_;
  fem::ConstraintSet cs_;
  Real nu_;
  SparseMatrixCSC mass_, stiff_, t_fold_;
  mutable SparseMatrixCSC mass_hat_, stiff_hat_;
  std::vector<bool> mask_;
};

}  // namespace gmrfpde::bench
