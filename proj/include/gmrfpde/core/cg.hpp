#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

enum class Preconditioner { kNone, kJacobi };

struct CGConfig {
  Real rtol = 1e-8;
  Real atol = 0.0;
  Index max_iter = 0;  // 0: defaults to 10 * n
  Preconditioner preconditioner = Preconditioner::kNone;
  Vector jacobi_diag;  // required when preconditioner == kJacobi (operator form)

  void validate() const {
    if (!(rtol > 0.0)) throw ContractError("cg: rtol must be positive");
    if (max_iter < 0) throw ContractError("cg: max_iter must be >= 1");
  }
};

struct CGResult {
  Vector x;
  Index iterations = 0;
  Real final_residual = 0.0;
  bool converged = false;
};

using LinearOperator = std::function<void(const Vector&, Vector&)>;

/// Preconditioned conjugate gradients for SPD operators. Stops when
/// ‖Q x - b‖ ≤ max(rtol·‖b‖, atol); hitting max_iter is reported through
/// `converged = false`. Breakdown (non-positive curvature) raises.
inline CGResult cg_solve(const LinearOperator& apply_q, const Vector& b,
                         const Vector& x0, CGConfig cfg) {
  cfg.validate();
  Index n = static_cast<Index>(b.size());
  Index max_iter = cfg.max_iter > 0 ? cfg.max_iter : 10 * n;
  bool jacobi = cfg.preconditioner == Preconditioner::kJacobi;
  if (jacobi && static_cast<Index>(cfg.jacobi_diag.size()) != n)
    throw ContractError("cg: jacobi preconditioner requires the diagonal");

  CGResult res;
  res.x = x0.empty() ? Vector(n, 0.0) : x0;
  if (static_cast<Index>(res.x.size()) != n)
    throw DimensionError("cg: x0 dimension mismatch");

  Vector q(n);
  apply_q(res.x, q);
  Vector r = vec_sub(b, q);
  Real target = std::max(cfg.rtol * norm2(b), cfg.atol);

  auto precondition = [&](const Vector& v) {
    if (!jacobi) return v;
    Vector z(v);
    for (Index i = 0; i < n; ++i) z[i] /= cfg.jacobi_diag[i];
    return z;
  };

  Vector z = precondition(r);
  Vector p = z;
  Real rz = dot(r, z);
  res.final_residual = norm2(r);
  if (res.final_residual <= target) {
    res.converged = true;
    return res;
  }

  for (Index it = 1; it <= max_iter; ++it) {
    apply_q(p, q);
    Real pq = dot(p, q);
    if (!(pq > 0.0))
      throw NumericalError("cg: non-positive curvature, operator not SPD (pᵀQp = " +
                           std::to_string(pq) + ")");
    Real alpha = rz / pq;
    axpy(alpha, p, res.x);
    axpy(-alpha, q, r);
    res.iterations = it;
    res.final_residual = norm2(r);
    if (res.final_residual <= target) {
      res.converged = true;
      return res;
    }
    z = precondition(r);
    Real rz_new = dot(r, z);
    Real beta = rz_new / rz;
    rz = rz_new;
    for (Index i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

/// Matrix-backed convenience overload; wires the Jacobi diagonal automatically.
inline CGResult cg_solve(const SparseMatrixCSC& q, const Vector& b, const Vector& x0,
                         CGConfig cfg) {
  if (cfg.preconditioner == Preconditioner::kJacobi && cfg.jacobi_diag.empty())
    cfg.jacobi_diag = csc_diag(q);
  LinearOperator op = [&q](const Vector& v, Vector& out) { matvec(q, v, out); };
  return cg_solve(op, b, x0, cfg);
}

}  // namespace gmrfpde
