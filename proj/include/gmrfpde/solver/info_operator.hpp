#pragma once

#include <utility>
#include <vector>

#include "gmrfpde/fem/assembly.hpp"
#include "gmrfpde/fem/constraints.hpp"
#include "gmrfpde/fem/space.hpp"
#include "gmrfpde/gmrf.hpp"

namespace gmrfpde::solver {

/// Linear information operator: conditioning drives A u toward the target b
/// under the diagonal noise precision. Rows touch only DoFs whose basis
/// support contains the discretization point / element.
struct LinearInformationOperator {
  SparseMatrixCSC A;
  Vector b;                // target values (f at points, load vector, data)
  Vector noise_precision;  // diagonal

  AffineObservation to_observation() const {
    return AffineObservation::with_diagonal_noise(A, Vector(A.nrows, 0.0), b,
                                                  noise_precision);
  }
};

inline Gmrf condition_on(const Gmrf& prior, const LinearInformationOperator& op) {
  return condition_affine(prior, op.to_observation());
}

/// Collocation rows A_ij = (D φ_j)(x_i) for the strong-form operator
/// D = -a Δ + c·∇ + κ², with target b_i = f(x_i). Constraints fold the trial
/// side; nonzero constraint offsets shift the target.
inline LinearInformationOperator collocation_operator(const fem::FeSpace& space,
                                                      const fem::DifferentialOperatorSpec& op,
                                                      const std::vector<Real>& points,
                                                      const Vector& f_values,
                                                      Real noise_prec,
                                                      const fem::ConstraintSet& cs = {}) {
  op.validate(space);
  Index npts = static_cast<Index>(points.size()) / space.dim();
  require(static_cast<Index>(f_values.size()) == npts,
          "collocation: f_values length must match the point count");
  if (op.has_diffusion())
    require(space.order() >= 2,
            "collocation: second-order operators need at least quadratic elements");

  std::vector<Triplet> trips;
  std::vector<Index> dofs(space.dofs_per_element());
  std::vector<Real> vals(space.dofs_per_element());
  auto add_term = [&](Index row, Index e, const Real* x, fem::Deriv d, Real coeff) {
    if (coeff == 0.0) return;
    space.eval_element(e, x, d, dofs.data(), vals.data());
    for (Index k = 0; k < space.dofs_per_element(); ++k)
      trips.push_back({row, dofs[k], coeff * vals[k]});
    (void)e;
  };

  for (Index i = 0; i < npts; ++i) {
    const Real* x = points.data() + i * space.dim();
    Real xi, eta;
    Index e = space.locate(x, &xi, &eta);
    if (op.has_diffusion()) {
      Real a_e = op.diffusion_on_element(e);
      add_term(i, e, x, {2, 0}, -a_e);
      if (space.dim() == 2) add_term(i, e, x, {0, 2}, -a_e);
    }
    if (!op.advection.empty()) {
      add_term(i, e, x, {1, 0}, op.advection[0]);
      if (space.dim() == 2) add_term(i, e, x, {0, 1}, op.advection[1]);
    }
    if (op.reaction != 0.0) add_term(i, e, x, {0, 0}, op.reaction);
  }

  LinearInformationOperator out;
  out.A = csc_from_triplets(npts, space.n_dofs(), std::move(trips));
  out.b = f_values;
  out.noise_precision.assign(npts, noise_prec);
  if (!cs.empty()) {
    cs.validate(space.n_dofs());
    SparseMatrixCSC folded = multiply(out.A, cs.fold_matrix(space.n_dofs()));
    if (cs.has_offsets()) {
      Vector shift = matvec(out.A, cs.offset_vector(space.n_dofs()));
      for (Index i = 0; i < npts; ++i) out.b[i] -= shift[i];
    }
    out.A = std::move(folded);
  }
  return out;
}

/// Weak-form observation rows A_ij = ∫ φ_i D φ_j (integration by parts on the
/// diffusion term) with b_i = ∫ φ_i f. Constrained test rows are dropped and
/// the trial side folded per the constraint set.
inline LinearInformationOperator fem_observation_operator(
    const fem::FeSpace& space, const fem::DifferentialOperatorSpec& op, Real noise_prec,
    const fem::ConstraintSet& cs = {}) {
  SparseMatrixCSC a = fem::assemble_stiffness(space, op);
  Vector b = fem::assemble_load(space, op);
  fem::FoldedObservation folded = fem::fold_weak_observation(a, b, cs);
  LinearInformationOperator out;
  out.A = std::move(folded.A);
  out.b = std::move(folded.b);
  out.noise_precision.assign(out.A.nrows, noise_prec);
  return out;
}

/// Point-evaluation (regression) rows A_ij = φ_j(x_i) with data y.
inline LinearInformationOperator point_observation_operator(
    const fem::FeSpace& space, const std::vector<Real>& points, const Vector& y,
    Real noise_prec, const fem::ConstraintSet& cs = {}) {
  SparseMatrixCSC a = fem::eval_basis(space, points, {0, 0});
  Vector target = y;
  if (!cs.empty()) {
    auto [folded, shifted] = fem::fold_pointwise_operator(a, Vector(a.nrows, 0.0), cs);
    a = std::move(folded);
    for (Index i = 0; i < a.nrows; ++i) target[i] -= shifted[i];
  }
  LinearInformationOperator out;
  out.A = std::move(a);
  out.b = std::move(target);
  out.noise_precision.assign(out.A.nrows, noise_prec);
  return out;
}

}  // namespace gmrfpde::solver
