#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gmrfpde/core/cg.hpp"
#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/gmrf.hpp"
#include "gmrfpde/solver/residual.hpp"

namespace gmrfpde::solver {

enum class GnLinearSolver { kCholesky, kCg };

struct GaussNewtonConfig {
  Index max_iters = 10;
  Real decrement_tol = 1e-5;
  Real armijo_c = 1e-4;
  Real shrink = 0.5;
  Index max_backtracks = 30;
  GnLinearSolver linear_solver = GnLinearSolver::kCholesky;
  CGConfig cg;

  void validate() const {
    require(max_iters >= 1, "gauss-newton: max_iters must be >= 1");
    require(decrement_tol > 0.0, "gauss-newton: decrement_tol must be positive");
    require(armijo_c > 0.0 && armijo_c < 1.0, "gauss-newton: armijo constant in (0,1)");
    require(shrink > 0.0 && shrink < 1.0, "gauss-newton: shrink factor in (0,1)");
  }
};

struct GaussNewtonIteration {
  Index iter = 0;
  Real objective = 0.0;
  Real decrement = 0.0;
  Real step_size = 0.0;
  Index backtracks = 0;
  Index cg_iterations = 0;
};

struct GaussNewtonResult {
  Vector mode;
  std::vector<GaussNewtonIteration> trace;
  bool converged = false;
  Real final_decrement = 0.0;
  Index accepted_steps = 0;
};

/// Line search could not find an acceptable step; carries the trace so far.
class GaussNewtonStagnation : public NumericalError {
 public:
  GaussNewtonStagnation(const std::string& msg, std::vector<GaussNewtonIteration> trace)
      : NumericalError(msg), trace_(std::move(trace)) {}
  const std::vector<GaussNewtonIteration>& trace() const { return trace_; }

 private:
  std::vector<GaussNewtonIteration> trace_;
};

namespace detail {

inline Real negative_log_density(const Gmrf& prior, const NonlinearResidual& res,
                                 const Vector& x, const Vector& fx) {
  Vector centered = vec_sub(x, prior.mean());
  Real quad;
  if (prior.has_sqrt()) {
    // ½‖Sᵀ(x-μ)‖² is a sum of squares and keeps full precision even when the
    // precision matrix mixes scales; ½cᵀQc loses digits to cancellation.
    Vector sc = matvec_transpose(prior.sqrt(), centered);
    quad = 0.5 * dot(sc, sc);
  } else {
    quad = 0.5 * dot(centered, matvec(prior.precision(), centered));
  }
  Real fit = 0.0;
  for (Index i = 0; i < res.output_dim; ++i) {
    Real r = res.target[i] - fx[i];
    fit += res.noise_precision[i] * r * r;
  }
  return quad + 0.5 * fit;
}

}  // namespace detail

/// Gauss-Newton mode finding for the posterior density induced by a GMRF
/// prior and the nonlinear likelihood y | u ~ N(f(u), Q_ε⁻¹). Each iteration
/// solves H d = -∇(-log π) with H = Q + Jᵀ Q_ε J, takes an Armijo-backtracked
/// step, and stops when the Newton decrement √(dᵀHd) falls below tolerance.
/// The symbolic factorization is computed once and reused; in CG mode the
/// previous direction warm-starts the next solve.
inline GaussNewtonResult gauss_newton(const Gmrf& prior, const NonlinearResidual& res,
                                      const Vector& x0, const GaussNewtonConfig& cfg) {
  cfg.validate();
  require(static_cast<Index>(x0.size()) == prior.dim(),
          "gauss-newton: x0 length must match the prior dimension");
  require(res.input_dim == prior.dim(),
          "gauss-newton: residual input dimension must match the prior");

  GaussNewtonResult out;
  out.mode = x0;
  std::optional<SymbolicFactor> symbolic;
  Vector warm_start;

  // With mixed-scale precisions, ½cᵀQc evaluated through the assembled matrix
  // loses digits to cancellation. When a square root S is present, objective,
  // gradient S(Sᵀc) and Gauss-Newton matrix SSᵀ + JᵀQ_εJ all go through S so
  // the line search sees one consistent function.
  bool use_sqrt = prior.has_sqrt();
  SparseMatrixCSC q_eff =
      use_sqrt && cfg.linear_solver == GnLinearSolver::kCholesky
          ? symmetrize(multiply(prior.sqrt(), transpose(prior.sqrt())))
          : prior.precision();

  auto prior_gradient = [&](const Vector& centered) {
    if (use_sqrt) return matvec(prior.sqrt(), matvec_transpose(prior.sqrt(), centered));
    return matvec(prior.precision(), centered);
  };

  for (Index iter = 1; iter <= cfg.max_iters; ++iter) {
    Vector fx = res.eval(out.mode);
    SparseMatrixCSC jac = res.jacobian(out.mode);

    // grad = Q(x - mu) - Jᵀ Q_ε (y - f(x))
    Vector grad = prior_gradient(vec_sub(out.mode, prior.mean()));
    Vector weighted(res.output_dim);
    for (Index i = 0; i < res.output_dim; ++i)
      weighted[i] = res.noise_precision[i] * (res.target[i] - fx[i]);
    Vector jt_w = matvec_transpose(jac, weighted);
    for (Index i = 0; i < prior.dim(); ++i) grad[i] -= jt_w[i];

    Vector rhs = scaled(grad, -1.0);
    Vector direction;
    Index cg_iters = 0;
    if (cfg.linear_solver == GnLinearSolver::kCholesky) {
      SparseMatrixCSC h = symmetrize(
          add(q_eff, multiply(transpose(jac), scale_rows(res.noise_precision, jac))));
      if (!symbolic) symbolic = symbolic_analyze(h, amd_order(h));
      CholeskyFactor factor = cholesky_refactor(*symbolic, h);
      direction = solve(factor, rhs);
    } else {
      LinearOperator apply_h = [&](const Vector& v, Vector& hv) {
        hv = prior_gradient(v);
        Vector jv = matvec(jac, v);
        for (Index i = 0; i < res.output_dim; ++i) jv[i] *= res.noise_precision[i];
        Vector jtjv = matvec_transpose(jac, jv);
        for (Index i = 0; i < prior.dim(); ++i) hv[i] += jtjv[i];
      };
      CGConfig cg_cfg = cfg.cg;
      if (cg_cfg.preconditioner == Preconditioner::kJacobi && cg_cfg.jacobi_diag.empty()) {
        if (use_sqrt) {
          const SparseMatrixCSC& s = prior.sqrt();
          cg_cfg.jacobi_diag.assign(prior.dim(), 0.0);
          for (Index p = 0; p < s.nnz(); ++p)
            cg_cfg.jacobi_diag[s.row_idx[p]] += s.values[p] * s.values[p];
        } else {
          cg_cfg.jacobi_diag = csc_diag(prior.precision());
        }
        for (Index j = 0; j < jac.ncols; ++j)
          for (Index p = jac.col_ptr[j]; p < jac.col_ptr[j + 1]; ++p)
            cg_cfg.jacobi_diag[j] +=
                res.noise_precision[jac.row_idx[p]] * jac.values[p] * jac.values[p];
      }
      CGResult cg_res = cg_solve(apply_h, rhs, warm_start, cg_cfg);
      if (!cg_res.converged)
        throw NumericalError("gauss-newton: CG did not converge in iteration " +
                             std::to_string(iter));
      direction = std::move(cg_res.x);
      cg_iters = cg_res.iterations;
      warm_start = direction;
    }

    // dᵀ H d = -dᵀ grad for the exact solve; clamp against round-off.
    Real decrement = std::sqrt(std::max(0.0, -dot(grad, direction)));
    Real objective = detail::negative_log_density(prior, res, out.mode, fx);

    GaussNewtonIteration rec;
    rec.iter = iter;
    rec.objective = objective;
    rec.decrement = decrement;
    rec.cg_iterations = cg_iters;

    // Converged when the decrement subceeds the tolerance, or when the
    // model-predicted decrease ½·dec² falls below the objective's floating-
    // point resolution (no representable progress is left).
    if (decrement < cfg.decrement_tol ||
        0.5 * decrement * decrement <= 1e-14 * (1.0 + std::abs(objective))) {
      out.trace.push_back(rec);
      out.converged = true;
      out.final_decrement = decrement;
      return out;
    }

    // Armijo backtracking on -log pi.
    Real slope = dot(grad, direction);
    Real alpha = 1.0;
    Index backtracks = 0;
    while (true) {
      Vector candidate = out.mode;
      axpy(alpha, direction, candidate);
      Real cand_obj =
          detail::negative_log_density(prior, res, candidate, res.eval(candidate));
      if (cand_obj <= objective + cfg.armijo_c * alpha * slope) {
        out.mode = std::move(candidate);
        break;
      }
      if (++backtracks > cfg.max_backtracks) {
        out.trace.push_back(rec);
        throw GaussNewtonStagnation(
            "gauss-newton: line search failed after " + std::to_string(backtracks - 1) +
                " backtracks at iteration " + std::to_string(iter),
            out.trace);
      }
      alpha *= cfg.shrink;
    }
    rec.step_size = alpha;
    rec.backtracks = backtracks;
    out.trace.push_back(rec);
    out.accepted_steps += 1;
    out.final_decrement = decrement;
  }
  return out;
}

/// Gauss-Newton Laplace approximation at the mode: mean = mode, precision
/// Q + J(mode)ᵀ Q_ε J(mode), square root [prior sqrt | Jᵀ L_ε].
inline Gmrf laplace_posterior(const Gmrf& prior, const NonlinearResidual& res,
                              const Vector& mode) {
  SparseMatrixCSC jac = res.jacobian(mode);
  SparseMatrixCSC q_la = symmetrize(
      add(prior.precision(), multiply(transpose(jac), scale_rows(res.noise_precision, jac))));
  std::optional<SparseMatrixCSC> sqrt;
  if (prior.has_sqrt()) {
    Vector noise_sqrt(res.noise_precision);
    for (Real& v : noise_sqrt) v = std::sqrt(v);
    sqrt = hcat(prior.sqrt(), multiply(transpose(jac), csc_diagonal(noise_sqrt)));
  }
  return Gmrf(mode, std::move(q_la), std::move(sqrt));
}

}  // namespace gmrfpde::solver
