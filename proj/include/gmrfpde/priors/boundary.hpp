#pragma once

#include <cmath>
#include <functional>
#include <unordered_map>

#include "gmrfpde/fem/constraints.hpp"
#include "gmrfpde/fem/space.hpp"

namespace gmrfpde::priors {

/// Dirichlet constraints on every boundary DoF: u_k = value(x_k) with noise
/// variance eps. The homogeneous case (default) embeds directly into priors;
/// nonzero values are only usable with system-mode solves.
inline fem::ConstraintSet embed_dirichlet(
    const fem::FeSpace& space, Real eps = 1e-10,
    const std::function<Real(const Real*)>& value = nullptr) {
  fem::ConstraintSet cs;
  for (Index d : space.boundary_dofs()) {
    Real offset = 0.0;
    if (value) {
      Real x[2] = {space.dof_x(d), space.dim() == 2 ? space.dof_y(d) : 0.0};
      offset = value(x);
    }
    cs.add({d, {}, eps, offset});
  }
  cs.validate(space.n_dofs());
  return cs;
}

/// Periodic constraints: every DoF on a "max" face is tied to its mirror on
/// the matching "min" face (both axes in 2D; corners wrap in both). Throws if
/// a mirror DoF cannot be found.
inline fem::ConstraintSet embed_periodic(const fem::FeSpace& space, Real eps = 1e-10) {
  const auto& mesh = space.mesh();
  Real x_min = mesh.axis_x.front(), x_max = mesh.axis_x.back();
  Real span_x = x_max - x_min;
  Real y_min = space.dim() == 2 ? mesh.axis_y.front() : 0.0;
  Real y_max = space.dim() == 2 ? mesh.axis_y.back() : 0.0;
  Real tol = 1e-9 * span_x;

  // Coordinate hash of all DoFs for mirror lookup.
  auto key_of = [&](Real x, Real y) {
    long long kx = std::llround((x - x_min) / span_x * 1e9);
    long long ky = space.dim() == 2 ? std::llround((y - y_min) / (y_max - y_min) * 1e9) : 0;
    return kx * 2000000011ll + ky;
  };
  std::unordered_map<long long, Index> by_coord;
  for (Index d = 0; d < space.n_dofs(); ++d)
    by_coord[key_of(space.dof_x(d), space.dim() == 2 ? space.dof_y(d) : 0.0)] = d;

  fem::ConstraintSet cs;
  for (Index d = 0; d < space.n_dofs(); ++d) {
    Real x = space.dof_x(d);
    Real y = space.dim() == 2 ? space.dof_y(d) : 0.0;
    bool wrap_x = std::abs(x - x_max) <= tol;
    bool wrap_y = space.dim() == 2 && std::abs(y - y_max) <= tol;
    if (!wrap_x && !wrap_y) continue;
    Real mx = wrap_x ? x_min : x;
    Real my = wrap_y ? y_min : y;
    auto it = by_coord.find(key_of(mx, my));
    if (it == by_coord.end())
      throw ContractError("embed_periodic: no mirror dof for dof " + std::to_string(d));
    cs.add({d, {{it->second, 1.0}}, eps, 0.0});
  }
  cs.validate(space.n_dofs());
  return cs;
}

}  // namespace gmrfpde::priors
