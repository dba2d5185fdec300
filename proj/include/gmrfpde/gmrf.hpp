#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

#include "gmrfpde/core/cg.hpp"
#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/core/rng.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/takahashi.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

/// Gaussian in precision form: u ~ N(mean, Q⁻¹) with sparse SPD Q. May carry
/// a left square root S with Q = S Sᵀ (possibly rectangular, n×m with m ≥ n).
/// Values are immutable after construction; the Cholesky factor is computed
/// lazily on first use and shared between copies.
class Gmrf {
 public:
  Gmrf(Vector mean, SparseMatrixCSC precision,
       std::optional<SparseMatrixCSC> sqrt = std::nullopt)
      : mean_(std::move(mean)),
        precision_(std::move(precision)),
        sqrt_(std::move(sqrt)),
        cache_(std::make_shared<FactorCache>()) {
    if (precision_.nrows != precision_.ncols)
      throw DimensionError("gmrf: precision must be square");
    if (static_cast<Index>(mean_.size()) != precision_.nrows)
      throw DimensionError("gmrf: mean length does not match precision");
    if (sqrt_ && sqrt_->nrows != precision_.nrows)
      throw DimensionError("gmrf: sqrt row count does not match precision");
  }

  Index dim() const { return precision_.nrows; }
  const Vector& mean() const { return mean_; }
  const SparseMatrixCSC& precision() const { return precision_; }
  bool has_sqrt() const { return sqrt_.has_value(); }
  const SparseMatrixCSC& sqrt() const {
    require(sqrt_.has_value(), "gmrf: no square root attached");
    return *sqrt_;
  }

  /// Seeds the factor cache with an externally computed factor (e.g. the one
  /// produced while conditioning).
  void attach_factor(std::shared_ptr<const CholeskyFactor> f) const {
    std::call_once(cache_->once, [&] { cache_->factor = std::move(f); });
  }

  const CholeskyFactor& factor() const {
    std::call_once(cache_->once, [&] {
      cache_->factor = std::make_shared<const CholeskyFactor>(cholesky_factor(precision_));
    });
    return *cache_->factor;
  }

 private:
  struct FactorCache {
    mutable std::once_flag once;
    std::shared_ptr<const CholeskyFactor> factor;
  };

  Vector mean_;
  SparseMatrixCSC precision_;
  std::optional<SparseMatrixCSC> sqrt_;
  std::shared_ptr<FactorCache> cache_;
};

/// Likelihood y | u ~ N(A u + b, Q_ε⁻¹). The noise precision is either a
/// diagonal (fast path) or a general sparse SPD matrix.
struct AffineObservation {
  SparseMatrixCSC A;
  Vector b;
  Vector y;
  std::optional<Vector> noise_precision_diag;
  std::optional<SparseMatrixCSC> noise_precision_sparse;

  Index rows() const { return A.nrows; }

  void validate(Index state_dim) const {
    if (A.ncols != state_dim) throw DimensionError("observation: A columns != state dim");
    if (static_cast<Index>(b.size()) != A.nrows)
      throw DimensionError("observation: offset length != rows of A");
    if (static_cast<Index>(y.size()) != A.nrows)
      throw DimensionError("observation: data length != rows of A");
    if (noise_precision_diag) {
      if (static_cast<Index>(noise_precision_diag->size()) != A.nrows)
        throw DimensionError("observation: noise diagonal length != rows of A");
      for (Real v : *noise_precision_diag)
        if (!(v > 0.0)) throw ContractError("observation: noise precision must be positive");
    } else if (noise_precision_sparse) {
      if (noise_precision_sparse->nrows != A.nrows ||
          noise_precision_sparse->ncols != A.nrows)
        throw DimensionError("observation: noise precision shape mismatch");
    } else {
      throw ContractError("observation: no noise precision given");
    }
  }

  static AffineObservation with_diagonal_noise(SparseMatrixCSC A, Vector b, Vector y,
                                               Vector noise_diag) {
    AffineObservation obs;
    obs.A = std::move(A);
    obs.b = std::move(b);
    obs.y = std::move(y);
    obs.noise_precision_diag = std::move(noise_diag);
    return obs;
  }

  Vector apply_noise(const Vector& r) const {
    if (noise_precision_diag) {
      Vector out(r);
      for (std::size_t i = 0; i < r.size(); ++i) out[i] *= (*noise_precision_diag)[i];
      return out;
    }
    return matvec(*noise_precision_sparse, r);
  }

  /// Left square root L_ε of the noise precision (Q_ε = L_ε L_εᵀ).
  SparseMatrixCSC noise_sqrt() const {
    if (noise_precision_diag) {
      Vector s(*noise_precision_diag);
      for (Real& v : s) v = std::sqrt(v);
      return csc_diagonal(s);
    }
    CholeskyFactor f = cholesky_factor(*noise_precision_sparse);
    // Q_ε = Pᵀ L Lᵀ P, so Pᵀ L is a left square root in original coordinates.
    std::vector<Triplet> trips;
    trips.reserve(f.L.nnz());
    for (Index j = 0; j < f.L.ncols; ++j)
      for (Index p = f.L.col_ptr[j]; p < f.L.col_ptr[j + 1]; ++p)
        trips.push_back({f.perm[f.L.row_idx[p]], j, f.L.values[p]});
    return csc_from_triplets(f.dim(), f.dim(), std::move(trips));
  }
};

/// Closed-form conditioning on an affine observation:
///   Q_post = Q + Aᵀ Q_ε A,
///   μ_post = μ + Q_post⁻¹ Aᵀ Q_ε (y - (A μ + b)).
/// The posterior square root is [S | Aᵀ L_ε] when the prior carries one; the
/// factor computed for the mean solve is cached on the returned value.
inline Gmrf condition_affine(const Gmrf& prior, const AffineObservation& obs) {
  obs.validate(prior.dim());
  SparseMatrixCSC at = transpose(obs.A);

  SparseMatrixCSC atqa;
  if (obs.noise_precision_diag) {
    atqa = multiply(at, scale_rows(*obs.noise_precision_diag, obs.A));
  } else {
    atqa = multiply(at, multiply(*obs.noise_precision_sparse, obs.A));
  }
  SparseMatrixCSC q_post = symmetrize(add(prior.precision(), atqa));

  Vector residual = vec_sub(obs.y, vec_add(matvec(obs.A, prior.mean()), obs.b));
  Vector rhs = matvec_transpose(obs.A, obs.apply_noise(residual));

  auto factor = std::make_shared<const CholeskyFactor>(cholesky_factor(q_post));
  Vector delta = solve(*factor, rhs);
  Vector mean = vec_add(prior.mean(), delta);

  std::optional<SparseMatrixCSC> sqrt;
  if (prior.has_sqrt()) sqrt = hcat(prior.sqrt(), multiply(at, obs.noise_sqrt()));

  Gmrf posterior(std::move(mean), std::move(q_post), std::move(sqrt));
  posterior.attach_factor(factor);
  return posterior;
}

/// μ + Pᵀ L⁻ᵀ z for standard-normal z; exact draw from N(μ, Q⁻¹).
inline Vector sample_direct(const Gmrf& g, const Vector& z) {
  if (static_cast<Index>(z.size()) != g.dim())
    throw DimensionError("sample_direct: z length mismatch");
  const CholeskyFactor& f = g.factor();
  Vector w = solve_triangular(f, z, TriangularMode::kUpper);
  Vector x = f.apply_perm_inv(w);
  return vec_add(g.mean(), x);
}

inline Vector sample_direct(const Gmrf& g, Rng& rng) {
  return sample_direct(g, rng.normal_vector(g.dim()));
}

/// μ + Q⁻¹ (S z) solved with CG; distributionally equal to sample_direct.
/// Requires the square root (z has one entry per column of S).
inline Vector sample_cg(const Gmrf& g, const Vector& z, CGConfig cfg) {
  require(g.has_sqrt(), "sample_cg: gmrf carries no square root");
  const SparseMatrixCSC& s = g.sqrt();
  if (static_cast<Index>(z.size()) != s.ncols)
    throw DimensionError("sample_cg: z length must equal sqrt column count");
  Vector b = matvec(s, z);
  if (cfg.preconditioner == Preconditioner::kJacobi && cfg.jacobi_diag.empty())
    cfg.jacobi_diag = csc_diag(g.precision());
  CGResult res = cg_solve(g.precision(), b, Vector(), cfg);
  if (!res.converged)
    throw NumericalError("sample_cg: CG did not reach tolerance after " +
                         std::to_string(res.iterations) +
                         " iterations (residual " + std::to_string(res.final_residual) + ")");
  return vec_add(g.mean(), res.x);
}

/// Marginal variances through the Takahashi recursion (exact).
inline Vector variance_takahashi(const Gmrf& g) {
  return takahashi_diagonal(g.factor());
}

/// Rao-Blackwellized Monte Carlo estimate of the marginal variances:
///   Var(u_i) = 1/Q_ii + Var_samples( E[u_i | u_{-i}] ),
/// with E[u_i | u_{-i}] = μ_i - (1/Q_ii) Σ_{j≠i} Q_ij (u_j - μ_j) evaluated on
/// exact prior samples. Deterministic for a fixed seed.
inline Vector rbmc_variance(const Gmrf& g, Index n_samples, std::uint64_t rng_seed) {
  require(n_samples >= 2, "rbmc_variance: need at least 2 samples");
  Index n = g.dim();
  Vector qdiag = csc_diag(g.precision());
  for (Real v : qdiag)
    if (!(v > 0.0)) throw NumericalError("rbmc_variance: non-positive precision diagonal");

  Rng rng(rng_seed);
  Vector mean_m(n, 0.0), m2(n, 0.0);
  for (Index s = 0; s < n_samples; ++s) {
    Vector u = sample_direct(g, rng);
    Vector centered = vec_sub(u, g.mean());
    Vector qc = matvec(g.precision(), centered);
    // conditional mean correction: m = μ + centered - D⁻¹ Q centered
    Vector m(n);
    for (Index i = 0; i < n; ++i) m[i] = g.mean()[i] + centered[i] - qc[i] / qdiag[i];
    // Welford update, per coordinate.
    for (Index i = 0; i < n; ++i) {
      Real delta = m[i] - mean_m[i];
      mean_m[i] += delta / static_cast<Real>(s + 1);
      m2[i] += delta * (m[i] - mean_m[i]);
    }
  }
  Vector var(n);
  for (Index i = 0; i < n; ++i)
    var[i] = 1.0 / qdiag[i] + m2[i] / static_cast<Real>(n_samples - 1);
  return var;
}

}  // namespace gmrfpde
