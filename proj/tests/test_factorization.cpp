#include <doctest.h>

#include "gmrfpde/core/amd.hpp"
#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "oracles.hpp"

using namespace gmrfpde;

namespace {

SparseMatrixCSC grid_laplacian(Index g) {
  std::vector<Triplet> t;
  auto id = [g](Index i, Index j) { return i * g + j; };
  for (Index i = 0; i < g; ++i)
    for (Index j = 0; j < g; ++j) {
      t.push_back({id(i, j), id(i, j), 4.1});
      if (i + 1 < g) {
        t.push_back({id(i, j), id(i + 1, j), -1.0});
        t.push_back({id(i + 1, j), id(i, j), -1.0});
      }
      if (j + 1 < g) {
        t.push_back({id(i, j), id(i, j + 1), -1.0});
        t.push_back({id(i, j + 1), id(i, j), -1.0});
      }
    }
  return csc_from_triplets(g * g, g * g, t);
}

SparseMatrixCSC tridiagonal(Index n, Real d, Real off) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, d});
    if (i + 1 < n) {
      t.push_back({i, i + 1, off});
      t.push_back({i + 1, i, off});
    }
  }
  return csc_from_triplets(n, n, t);
}

bool is_permutation(const std::vector<Index>& p, Index n) {
  if (static_cast<Index>(p.size()) != n) return false;
  std::vector<bool> seen(n, false);
  for (Index v : p) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

}  // namespace

TEST_CASE("amd on the identity pattern is a valid permutation with nnz(L) = n") {
  SparseMatrixCSC eye = csc_identity(12);
  std::vector<Index> p = amd_order(eye);
  CHECK(is_permutation(p, 12));
  CholeskyFactor f = cholesky_factor(scale(eye, 4.0), p);
  CHECK(f.L.nnz() == 12);
}

TEST_CASE("amd keeps a tridiagonal chain fill-free") {
  SparseMatrixCSC q = tridiagonal(10, 2.0, -0.9);
  std::vector<Index> p = amd_order(q);
  CHECK(is_permutation(p, 10));
  CholeskyFactor f = cholesky_factor(q, p);
  // Natural ordering has zero fill beyond the band; AMD must not do worse.
  CholeskyFactor f_nat = cholesky_factor(q, natural_order(10));
  CHECK(f_nat.L.nnz() == 19);
  CHECK(f.L.nnz() <= f_nat.L.nnz());
}

TEST_CASE("amd reduces fill on a 2D 5-point grid") {
  SparseMatrixCSC q = grid_laplacian(8);
  CholeskyFactor f_amd = cholesky_factor(q, amd_order(q));
  CholeskyFactor f_nat = cholesky_factor(q, natural_order(64));
  CHECK(f_amd.L.nnz() < f_nat.L.nnz());
}

TEST_CASE("amd rejects asymmetric patterns") {
  SparseMatrixCSC bad = csc_from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {0, 1, 1.0}});
  CHECK_THROWS_AS(amd_order(bad), StructuralError);
}

TEST_CASE("amd yields valid permutations on random symmetric patterns") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Index n = 5 + static_cast<Index>(rng.uniform() * 40);
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.15) {
          t.push_back({i, j, 1.0});
          t.push_back({j, i, 1.0});
        }
    std::vector<Index> p = amd_order(csc_from_triplets(n, n, t));
    CHECK(is_permutation(p, n));
  }
}

TEST_CASE("cholesky of 4I is 2I") {
  SparseMatrixCSC q = scale(csc_identity(3), 4.0);
  CholeskyFactor f = cholesky_factor(q, natural_order(3));
  for (Index i = 0; i < 3; ++i) CHECK(f.L.coeff(i, i) == doctest::Approx(2.0));
  CHECK(f.L.nnz() == 3);
}

TEST_CASE("cholesky 2x2 closed form") {
  SparseMatrixCSC q = csc_from_triplets(2, 2, {{0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 3.0}});
  CholeskyFactor f = cholesky_factor(q, natural_order(2));
  CHECK(f.L.coeff(0, 0) == doctest::Approx(2.0));
  CHECK(f.L.coeff(1, 0) == doctest::Approx(1.0));
  CHECK(f.L.coeff(1, 1) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("random SPD 20x20 reconstructs against the dense oracle") {
  Rng rng(5);
  Index n = 20;
  oracle::Dense a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (rng.uniform() < 0.3) a(i, j) = rng.normal();
  oracle::Dense q_dense = oracle::matmul(oracle::transpose(a), a);
  for (Index i = 0; i < n; ++i) q_dense(i, i) += n;

  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (q_dense(i, j) != 0.0) t.push_back({i, j, q_dense(i, j)});
  SparseMatrixCSC q = csc_from_triplets(n, n, t);

  for (bool use_amd : {false, true}) {
    CholeskyFactor f = cholesky_factor(q, use_amd ? amd_order(q) : natural_order(n));
    // Rebuild Q = Pᵀ L Lᵀ P and compare in the Frobenius norm.
    SparseMatrixCSC llt = multiply(f.L, transpose(f.L));
    oracle::Dense recon(n, n);
    oracle::Dense llt_d = oracle::from_sparse(llt);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) recon(f.perm[i], f.perm[j]) = llt_d(i, j);
    CHECK(oracle::frobenius_distance(recon, q_dense) / oracle::frobenius(q_dense) < 1e-10);
  }
}

TEST_CASE("cholesky reports the failing pivot index for indefinite input") {
  SparseMatrixCSC q =
      csc_from_triplets(3, 3, {{0, 0, 2.0}, {1, 1, -1.0}, {2, 2, 3.0}});
  try {
    cholesky_factor(q, natural_order(3));
    FAIL("expected NotPositiveDefiniteError");
  } catch (const NotPositiveDefiniteError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("solve_triangular full mode inverts Q") {
  SparseMatrixCSC q4 = scale(csc_identity(3), 4.0);
  CholeskyFactor f4 = cholesky_factor(q4, natural_order(3));
  Vector x = solve_triangular(f4, {4.0, 4.0, 4.0}, TriangularMode::kFull);
  for (Real v : x) CHECK(v == doctest::Approx(1.0));

  SparseMatrixCSC q = csc_from_triplets(2, 2, {{0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 3.0}});
  CholeskyFactor f = cholesky_factor(q, natural_order(2));
  Vector sol = solve_triangular(f, {1.0, 0.0}, TriangularMode::kFull);
  CHECK(sol[0] == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(sol[1] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("full solve followed by multiplication recovers the input") {
  SparseMatrixCSC q = grid_laplacian(5);
  CholeskyFactor f = cholesky_factor(q, amd_order(q));
  Rng rng(9);
  Vector b = rng.normal_vector(25);
  Vector x = solve_triangular(f, b, TriangularMode::kFull);
  Vector back = matvec(q, x);
  for (Index i = 0; i < 25; ++i) CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-10));
}

TEST_CASE("permutation soundness: full solve equals dense solve on the corpus") {
  auto corpus = oracle::spd_corpus(15, 101);
  Rng rng(55);
  for (const SparseMatrixCSC& q : corpus) {
    Vector b = rng.normal_vector(q.nrows);
    CholeskyFactor f = cholesky_factor(q, amd_order(q));
    Vector x = solve_triangular(f, b, TriangularMode::kFull);
    Vector x_dense = oracle::solve_spd(oracle::from_sparse(q), b);
    Real num = 0.0, den = 0.0;
    for (Index i = 0; i < q.nrows; ++i) {
      num += (x[i] - x_dense[i]) * (x[i] - x_dense[i]);
      den += x_dense[i] * x_dense[i];
    }
    CHECK(std::sqrt(num) <= 1e-8 * std::sqrt(den) + 1e-14);
  }
}

TEST_CASE("symbolic analysis is reusable across refactorizations") {
  SparseMatrixCSC q = grid_laplacian(6);
  SymbolicFactor sym = symbolic_analyze(q, amd_order(q));
  CholeskyFactor f1 = cholesky_refactor(sym, q);
  SparseMatrixCSC q2 = scale(q, 3.0);
  CholeskyFactor f2 = cholesky_refactor(sym, q2);
  CHECK(f1.L.col_ptr == f2.L.col_ptr);
  Vector b(36, 1.0);
  Vector x1 = solve_triangular(f1, b, TriangularMode::kFull);
  Vector x2 = solve_triangular(f2, b, TriangularMode::kFull);
  for (Index i = 0; i < 36; ++i) CHECK(x1[i] == doctest::Approx(3.0 * x2[i]).epsilon(1e-10));
}

TEST_CASE("ordering never changes the solution") {
  auto corpus = oracle::spd_corpus(8, 4242);
  Rng rng(8);
  for (const SparseMatrixCSC& q : corpus) {
    Vector b = rng.normal_vector(q.nrows);
    Vector x_amd =
        solve_triangular(cholesky_factor(q, amd_order(q)), b, TriangularMode::kFull);
    Vector x_nat =
        solve_triangular(cholesky_factor(q, natural_order(q.nrows)), b, TriangularMode::kFull);
    Real num = 0.0, den = 0.0;
    for (Index i = 0; i < q.nrows; ++i) {
      num += (x_amd[i] - x_nat[i]) * (x_amd[i] - x_nat[i]);
      den += x_nat[i] * x_nat[i];
    }
    CHECK(std::sqrt(num) <= 1e-8 * std::sqrt(den) + 1e-14);
  }
}

TEST_CASE("amd fill never exceeds natural-order fill on the acceptance corpus") {
  auto corpus = oracle::spd_corpus(50, 20240817);
  for (const SparseMatrixCSC& q : corpus) {
    SymbolicFactor s_amd = symbolic_analyze(q, amd_order(q));
    SymbolicFactor s_nat = symbolic_analyze(q, natural_order(q.nrows));
    CHECK(s_amd.nnz_L <= s_nat.nnz_L);
  }
}
