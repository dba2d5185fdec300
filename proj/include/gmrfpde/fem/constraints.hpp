#pragma once

#include <unordered_set>
#include <utility>
#include <vector>

#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde::fem {

/// One linear constraint u_k = offset + Σ_i c_i u_{h(i)} with per-constraint
/// noise variance ε². Homogeneous Dirichlet: no terms, offset 0. Periodic:
/// one term with weight 1 pointing at the mirror DoF.
struct LinearConstraint {
  Index constrained = -1;
  std::vector<std::pair<Index, Real>> terms;
  Real noise_var = 1e-10;
  Real offset = 0.0;
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<LinearConstraint> items) : items_(std::move(items)) {}

  void add(LinearConstraint c) { items_.push_back(std::move(c)); }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<LinearConstraint>& items() const { return items_; }

  void validate(Index n) const {
    std::unordered_set<Index> constrained;
    for (const LinearConstraint& c : items_) {
      if (c.constrained < 0 || c.constrained >= n)
        throw ContractError("constraints: constrained index out of range");
      if (!constrained.insert(c.constrained).second)
        throw ContractError("constraints: dof " + std::to_string(c.constrained) +
                            " constrained twice");
      if (!(c.noise_var >= 0.0)) throw ContractError("constraints: negative noise variance");
    }
    for (const LinearConstraint& c : items_)
      for (const auto& [master, weight] : c.terms) {
        (void)weight;
        if (master < 0 || master >= n)
          throw ContractError("constraints: master index out of range");
        if (constrained.count(master))
          throw ContractError(
              "constraints: circular constraint, master dof " + std::to_string(master) +
              " is itself constrained");
      }
  }

  std::vector<bool> constrained_mask(Index n) const {
    std::vector<bool> mask(n, false);
    for (const LinearConstraint& c : items_) mask[c.constrained] = true;
    return mask;
  }

  std::vector<Index> unconstrained_dofs(Index n) const {
    std::vector<bool> mask = constrained_mask(n);
    std::vector<Index> out;
    for (Index i = 0; i < n; ++i)
      if (!mask[i]) out.push_back(i);
    return out;
  }

  /// Fold matrix T = I + Σ c_i e_k e_{h(i)}ᵀ. Columns of A·T are the
  /// "add scaled copies of column k to the master columns" operation; the
  /// physical field is recovered as ũ = T u (+ offsets).
  SparseMatrixCSC fold_matrix(Index n) const {
    std::vector<Triplet> t;
    t.reserve(n + 4 * items_.size());
    for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    for (const LinearConstraint& c : items_)
      for (const auto& [master, weight] : c.terms) t.push_back({c.constrained, master, weight});
    return csc_from_triplets(n, n, std::move(t));
  }

  /// ũ = T u + offsets.
  Vector expand(const Vector& u) const {
    Vector out(u);
    for (const LinearConstraint& c : items_) {
      Real v = u[c.constrained] + c.offset;
      for (const auto& [master, weight] : c.terms) v += weight * u[master];
      out[c.constrained] = v;
    }
    return out;
  }

  Vector offset_vector(Index n) const {
    Vector o(n, 0.0);
    for (const LinearConstraint& c : items_) o[c.constrained] = c.offset;
    return o;
  }

  bool has_offsets() const {
    for (const LinearConstraint& c : items_)
      if (c.offset != 0.0) return true;
    return false;
  }

 private:
  std::vector<LinearConstraint> items_;
};

namespace detail {

/// Tᵀ A T with constrained rows/columns zeroed and the given diagonal values
/// inserted at the constrained positions.
inline SparseMatrixCSC fold_and_mask(const SparseMatrixCSC& a, const ConstraintSet& cs,
                                     const Vector& diag_at_constrained) {
  Index n = a.nrows;
  SparseMatrixCSC t = cs.fold_matrix(n);
  SparseMatrixCSC folded = multiply(multiply(transpose(t), a), t);
  std::vector<bool> mask = cs.constrained_mask(n);
  std::vector<Triplet> trips;
  trips.reserve(folded.nnz() + cs.size());
  for (Index j = 0; j < n; ++j)
    for (Index p = folded.col_ptr[j]; p < folded.col_ptr[j + 1]; ++p) {
      Index i = folded.row_idx[p];
      if (mask[i] || mask[j]) continue;
      trips.push_back({i, j, folded.values[p]});
    }
  for (const LinearConstraint& c : cs.items())
    trips.push_back({c.constrained, c.constrained, diag_at_constrained[c.constrained]});
  return csc_from_triplets(n, n, std::move(trips));
}

}  // namespace detail

/// Applies constraints to a linear system A u = b: master columns/rows absorb
/// the constrained ones, constrained rows become unit rows with zero
/// right-hand side. Solve, then ConstraintSet::expand recovers the physical
/// field (slack entries solve to 0).
inline std::pair<SparseMatrixCSC, Vector> apply_constraints_system(
    const SparseMatrixCSC& a, const Vector& b, const ConstraintSet& cs) {
  Index n = a.nrows;
  cs.validate(n);
  if (cs.empty()) return {a, b};
  Vector ones(n, 1.0);
  SparseMatrixCSC a_hat = detail::fold_and_mask(a, cs, ones);
  Vector rhs(b);
  if (cs.has_offsets()) {
    Vector shift = matvec(a, cs.offset_vector(n));
    for (Index i = 0; i < n; ++i) rhs[i] -= shift[i];
  }
  SparseMatrixCSC t = cs.fold_matrix(n);
  Vector folded_rhs = matvec_transpose(t, rhs);
  for (const LinearConstraint& c : cs.items()) folded_rhs[c.constrained] = 0.0;
  return {a_hat, folded_rhs};
}

/// Applies constraints to the (K, M) pair that defines a GMRF through
/// K u ~ N(0, M): both matrices are folded, the constrained row/column of K
/// becomes the unit vector and M gets ε² on the constrained diagonal, making
/// the slack coordinate an independent N(0, ε²).
inline std::pair<SparseMatrixCSC, SparseMatrixCSC> apply_constraints_precision_pair(
    const SparseMatrixCSC& k, const SparseMatrixCSC& m, const ConstraintSet& cs) {
  Index n = k.nrows;
  cs.validate(n);
  require(!cs.has_offsets(),
          "precision-pair constraints require zero offsets (zero-mean GMRF)");
  if (cs.empty()) return {k, m};
  Vector ones(n, 1.0);
  Vector eps(n, 0.0);
  for (const LinearConstraint& c : cs.items()) {
    require(c.noise_var > 0.0,
            "precision-pair constraints need strictly positive noise variance");
    eps[c.constrained] = c.noise_var;
  }
  return {detail::fold_and_mask(k, cs, ones), detail::fold_and_mask(m, cs, eps)};
}

/// Folds a weak-form observation pair (A, b): trial and test sides are folded,
/// then the rows of constrained test functions are dropped. Returns the
/// compressed operator, right-hand side, and the kept row indices.
struct FoldedObservation {
  SparseMatrixCSC A;
  Vector b;
  std::vector<Index> kept_rows;
};

inline FoldedObservation fold_weak_observation(const SparseMatrixCSC& a, const Vector& b,
                                               const ConstraintSet& cs) {
  Index n = a.nrows;
  cs.validate(n);
  FoldedObservation out;
  if (cs.empty()) {
    out.A = a;
    out.b = b;
    out.kept_rows.resize(n);
    for (Index i = 0; i < n; ++i) out.kept_rows[i] = i;
    return out;
  }
  SparseMatrixCSC t = cs.fold_matrix(n);
  Vector rhs(b);
  if (cs.has_offsets()) {
    Vector shift = matvec(a, cs.offset_vector(n));
    for (Index i = 0; i < n; ++i) rhs[i] -= shift[i];
  }
  SparseMatrixCSC folded = multiply(multiply(transpose(t), a), t);
  Vector folded_rhs = matvec_transpose(t, rhs);
  out.kept_rows = cs.unconstrained_dofs(n);
  // Zero out trial columns of constrained (slack) dofs, then compress rows.
  std::vector<bool> mask = cs.constrained_mask(n);
  std::vector<Triplet> trips;
  for (Index j = 0; j < n; ++j) {
    if (mask[j]) continue;
    for (Index p = folded.col_ptr[j]; p < folded.col_ptr[j + 1]; ++p)
      trips.push_back({folded.row_idx[p], j, folded.values[p]});
  }
  SparseMatrixCSC masked = csc_from_triplets(n, n, std::move(trips));
  out.A = select_rows(masked, out.kept_rows);
  out.b.resize(out.kept_rows.size());
  for (std::size_t i = 0; i < out.kept_rows.size(); ++i) out.b[i] = folded_rhs[out.kept_rows[i]];
  return out;
}

/// Folds a pointwise (collocation / evaluation) operator: the operator acts on
/// the physical field ũ = T u + o, so A ũ = (A T) u + A o; the offset shift is
/// returned as an adjustment to the observation offset b.
inline std::pair<SparseMatrixCSC, Vector> fold_pointwise_operator(
    const SparseMatrixCSC& a, const Vector& b, const ConstraintSet& cs) {
  Index n = a.ncols;
  cs.validate(n);
  if (cs.empty()) return {a, b};
  SparseMatrixCSC at = multiply(a, cs.fold_matrix(n));
  Vector b_shift(b);
  if (cs.has_offsets()) {
    Vector shift = matvec(a, cs.offset_vector(n));
    for (std::size_t i = 0; i < b_shift.size(); ++i) b_shift[i] += shift[i];
  }
  return {at, b_shift};
}

}  // namespace gmrfpde::fem
