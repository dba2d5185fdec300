#pragma once

// Built-in invariant battery behind the `check` CLI subcommand: a quick
// cross-section of the library's defining identities, each checked against an
// independent route. The full oracle suites live in the test binaries; this
// runs in a few seconds without any test framework.

#include <cmath>
#include <functional>
#include <iostream>
#include <string>

#include "gmrfpde/bench/cole_hopf.hpp"
#include "gmrfpde/bench/metrics.hpp"
#include "gmrfpde/core/cg.hpp"
#include "gmrfpde/core/takahashi.hpp"
#include "gmrfpde/fem/assembly.hpp"
#include "gmrfpde/gmrf.hpp"
#include "gmrfpde/priors/boundary.hpp"
#include "gmrfpde/priors/matern.hpp"
#include "gmrfpde/priors/spatiotemporal.hpp"

namespace gmrfpde::bench {

inline bool run_self_checks(std::ostream& os) {
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string note;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    os << (ok ? "PASS " : "FAIL ") << name << note << "\n";
    if (!ok) ++failures;
  };

  check("cholesky reconstructs P Q Pt = L Lt on a 2D grid precision", [] {
    fem::FeSpace s(fem::build_unit_square_mesh(6), 1);
    Gmrf g = priors::matern_prior(s, {8.0, 2, 1.0});
    CholeskyFactor f = cholesky_factor(g.precision());
    SparseMatrixCSC llt = multiply(f.L, transpose(f.L));
    SparseMatrixCSC perm = permute_symmetric(g.precision(), f.perm);
    return frobenius_norm(add(llt, perm, 1.0, -1.0)) <=
           1e-10 * frobenius_norm(perm);
  });

  check("takahashi diagonal equals dense-inverse diagonal (n=40)", [] {
    std::vector<Triplet> t;
    for (Index i = 0; i < 40; ++i) {
      t.push_back({i, i, 2.5});
      if (i + 1 < 40) {
        t.push_back({i, i + 1, -1.0});
        t.push_back({i + 1, i, -1.0});
      }
    }
    SparseMatrixCSC q = csc_from_triplets(40, 40, t);
    Vector diag = takahashi_diagonal(cholesky_factor(q));
    // Independent route: columns of Q^{-1} by solves.
    CholeskyFactor f = cholesky_factor(q);
    for (Index i = 0; i < 40; ++i) {
      Vector e(40, 0.0);
      e[i] = 1.0;
      Vector col = solve(f, e);
      if (std::abs(col[i] - diag[i]) > 1e-10) return false;
    }
    return true;
  });

  check("cg agrees with the direct solve at tolerance", [] {
    fem::FeSpace s(fem::build_unit_square_mesh(8), 1);
    Gmrf g = priors::matern_prior(s, {10.0, 2, 1.0});
    Rng rng(1);
    Vector b = rng.normal_vector(g.dim());
    CGConfig cfg;
    cfg.rtol = 1e-10;
    cfg.preconditioner = Preconditioner::kJacobi;
    CGResult res = cg_solve(g.precision(), b, Vector(), cfg);
    Vector direct = solve(g.factor(), b);
    Real num = 0.0, den = 0.0;
    for (Index i = 0; i < g.dim(); ++i) {
      num += (res.x[i] - direct[i]) * (res.x[i] - direct[i]);
      den += direct[i] * direct[i];
    }
    return res.converged && std::sqrt(num / den) < 1e-6;
  });

  check("conditioning in blocks equals conditioning on the stack", [] {
    fem::FeSpace s(fem::build_interval_mesh(24, 0.0, 1.0), 1);
    Gmrf prior = priors::matern_prior(s, {6.0, 2, 1.0});
    Rng rng(5);
    std::vector<Real> p1 = {0.2, 0.4}, p2 = {0.6, 0.8};
    Vector y1 = rng.normal_vector(2), y2 = rng.normal_vector(2);
    SparseMatrixCSC a1 = fem::eval_basis(s, p1, {0, 0});
    SparseMatrixCSC a2 = fem::eval_basis(s, p2, {0, 0});
    Gmrf seq = condition_affine(
        condition_affine(prior, AffineObservation::with_diagonal_noise(
                                    a1, Vector(2, 0.0), y1, Vector(2, 50.0))),
        AffineObservation::with_diagonal_noise(a2, Vector(2, 0.0), y2, Vector(2, 50.0)));
    std::vector<Real> pall = {0.2, 0.4, 0.6, 0.8};
    SparseMatrixCSC a = fem::eval_basis(s, pall, {0, 0});
    Gmrf stacked = condition_affine(
        prior, AffineObservation::with_diagonal_noise(a, Vector(4, 0.0),
                                                      {y1[0], y1[1], y2[0], y2[1]},
                                                      Vector(4, 50.0)));
    Real err = 0.0;
    for (Index i = 0; i < prior.dim(); ++i)
      err = std::max(err, std::abs(seq.mean()[i] - stacked.mean()[i]));
    return err < 1e-10;
  });

  check("spatiotemporal square root reproduces the joint precision", [] {
    fem::FeSpace s(fem::build_interval_mesh(12, 0.0, 1.0), 1);
    priors::SpatiotemporalSpec spec;
    spec.t_grid = {0.0, 0.1, 0.2, 0.3};
    spec.spatial_op = fem::laplace_operator(0.2);
    spec.noise_spec = {8.0, 1, 1.0};
    spec.initial_spec = {8.0, 2, 1.0};
    auto [prior, flat] = priors::spatiotemporal_prior(s, spec);
    Rng rng(2);
    for (int probe = 0; probe < 10; ++probe) {
      Vector v = rng.normal_vector(flat.dim());
      Vector lhs = matvec(prior.joint_sqrt, matvec_transpose(prior.joint_sqrt, v));
      Vector rhs = matvec(prior.joint_precision, v);
      Real num = 0.0, den = 0.0;
      for (Index i = 0; i < flat.dim(); ++i) {
        num += (lhs[i] - rhs[i]) * (lhs[i] - rhs[i]);
        den += rhs[i] * rhs[i];
      }
      if (std::sqrt(num) > 1e-8 * std::sqrt(den)) return false;
    }
    return true;
  });

  check("constrained poisson solve hits the textbook solution", [] {
    Index n = 64;
    fem::FeSpace s(fem::build_interval_mesh(n, 0.0, 1.0), 1);
    fem::ConstraintSet cs = priors::embed_dirichlet(s);
    fem::DifferentialOperatorSpec op = fem::laplace_operator(1.0);
    SparseMatrixCSC k = fem::assemble_stiffness(s, op);
    Vector b = fem::assemble_load(s, [](const Real*) { return 1.0; });
    auto [k_hat, b_hat] = fem::apply_constraints_system(k, b, cs);
    Vector u = cs.expand(solve_triangular(cholesky_factor(k_hat), b_hat,
                                          TriangularMode::kFull));
    for (Index d = 0; d <= n; ++d) {
      Real x = s.dof_x(d);
      if (std::abs(u[d] - 0.5 * x * (1.0 - x)) > 1e-9) return false;
    }
    return true;
  });

  check("rbmc variance tracks takahashi within 5% (aggregate)", [] {
    fem::FeSpace s(fem::build_interval_mesh(30, 0.0, 1.0), 1);
    Gmrf g = priors::matern_prior(s, {10.0, 2, 2.0});
    Vector exact = variance_takahashi(g);
    Vector est = rbmc_variance(g, 2000, 11);
    Real num = 0.0, den = 0.0;
    for (Index i = 0; i < g.dim(); ++i) {
      num += (est[i] - exact[i]) * (est[i] - exact[i]);
      den += exact[i] * exact[i];
    }
    return std::sqrt(num / den) < 0.05;
  });

  check("cole-hopf reference preserves the initial condition and symmetry", [] {
    ColeHopfReference ref(0.1);
    for (Real x : {-0.7, -0.2, 0.35, 0.85})
      if (std::abs(ref(x, 0.0) + std::sin(M_PI * x)) > 1e-10) return false;
    for (Real t : {0.2, 0.7})
      if (std::abs(ref(0.0, t)) > 1e-10) return false;
    return true;
  });

  os << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed")
     << "\n";
  return failures == 0;
}

}  // namespace gmrfpde::bench
