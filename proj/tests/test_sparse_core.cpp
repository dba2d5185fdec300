#include <doctest.h>

#include <sstream>

#include "gmrfpde/core/amd.hpp"
#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "oracles.hpp"

using namespace gmrfpde;

TEST_CASE("csc_from_triplets builds the identity") {
  SparseMatrixCSC m = csc_from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
  CHECK(m.nnz() == 2);
  CHECK(m.coeff(0, 0) == 1.0);
  CHECK(m.coeff(1, 1) == 1.0);
  CHECK(m.coeff(0, 1) == 0.0);
  m.check_invariants();
}

TEST_CASE("csc_from_triplets sums duplicates") {
  SparseMatrixCSC m = csc_from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}});
  CHECK(m.nnz() == 1);
  CHECK(m.coeff(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("csc_from_triplets rejects out-of-range indices") {
  CHECK_THROWS_AS(csc_from_triplets(2, 2, {{2, 0, 1.0}}), StructuralError);
  CHECK_THROWS_AS(csc_from_triplets(2, 2, {{0, -1, 1.0}}), StructuralError);
}

TEST_CASE("random triplet set matches dense accumulation oracle") {
  Rng rng(42);
  std::vector<Triplet> trips;
  for (int k = 0; k < 40; ++k)
    trips.push_back({static_cast<Index>(rng.uniform() * 8),
                     static_cast<Index>(rng.uniform() * 8), rng.normal()});
  SparseMatrixCSC m = csc_from_triplets(8, 8, trips);
  m.check_invariants();

  oracle::Dense dense(8, 8);
  for (const Triplet& t : trips) dense(t.row, t.col) += t.value;
  oracle::Dense got = oracle::from_sparse(m);
  CHECK(oracle::frobenius_distance(dense, got) < 1e-14);
}

TEST_CASE("sparse algebra agrees with the dense oracle") {
  Rng rng(7);
  auto random_sparse = [&](Index nr, Index nc) {
    std::vector<Triplet> t;
    for (Index i = 0; i < nr; ++i)
      for (Index j = 0; j < nc; ++j)
        if (rng.uniform() < 0.3) t.push_back({i, j, rng.normal()});
    return csc_from_triplets(nr, nc, t);
  };
  SparseMatrixCSC a = random_sparse(9, 7), b = random_sparse(7, 5), c = random_sparse(9, 7);

  oracle::Dense da = oracle::from_sparse(a), db = oracle::from_sparse(b),
               dc = oracle::from_sparse(c);

  CHECK(oracle::frobenius_distance(oracle::from_sparse(multiply(a, b)),
                                   oracle::matmul(da, db)) < 1e-12);
  CHECK(oracle::frobenius_distance(oracle::from_sparse(add(a, c, 2.0, -1.5)),
                                   oracle::add(da, dc, 2.0, -1.5)) < 1e-12);
  CHECK(oracle::frobenius_distance(oracle::from_sparse(transpose(a)),
                                   oracle::transpose(da)) < 1e-12);

  Vector x(7);
  for (Real& v : x) v = rng.normal();
  Vector y_sparse = matvec(a, x);
  Vector y_dense = oracle::matvec(da, x);
  for (Index i = 0; i < 9; ++i) CHECK(y_sparse[i] == doctest::Approx(y_dense[i]));

  Vector z(9);
  for (Real& v : z) v = rng.normal();
  Vector t_sparse = matvec_transpose(a, z);
  Vector t_dense = oracle::matvec(oracle::transpose(da), z);
  for (Index i = 0; i < 7; ++i) CHECK(t_sparse[i] == doctest::Approx(t_dense[i]));
}

TEST_CASE("hcat, row selection and symmetric permutation") {
  SparseMatrixCSC a = csc_from_triplets(3, 2, {{0, 0, 1.0}, {2, 1, 2.0}});
  SparseMatrixCSC b = csc_from_triplets(3, 1, {{1, 0, 3.0}});
  SparseMatrixCSC h = hcat(a, b);
  CHECK(h.ncols == 3);
  CHECK(h.coeff(1, 2) == 3.0);
  CHECK(h.coeff(2, 1) == 2.0);

  SparseMatrixCSC sel = select_rows(h, {1, 2});
  CHECK(sel.nrows == 2);
  CHECK(sel.coeff(0, 2) == 3.0);
  CHECK(sel.coeff(1, 1) == 2.0);

  SparseMatrixCSC q =
      csc_from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 2.0}, {2, 2, 3.0}, {0, 1, 0.5}, {1, 0, 0.5}});
  std::vector<Index> perm = {2, 0, 1};
  SparseMatrixCSC p = permute_symmetric(q, perm);
  CHECK(p.coeff(0, 0) == 3.0);
  CHECK(p.coeff(1, 1) == 1.0);
  CHECK(p.coeff(1, 2) == 0.5);
}

TEST_CASE("coordinate text round-trip") {
  Rng rng(3);
  std::vector<Triplet> t;
  for (int k = 0; k < 25; ++k)
    t.push_back({static_cast<Index>(rng.uniform() * 6), static_cast<Index>(rng.uniform() * 5),
                 rng.normal()});
  SparseMatrixCSC m = csc_from_triplets(6, 5, t);
  std::stringstream ss;
  write_coordinate(m, ss);
  SparseMatrixCSC back = read_coordinate(ss);
  CHECK(back.nrows == m.nrows);
  CHECK(back.ncols == m.ncols);
  REQUIRE(back.nnz() == m.nnz());
  for (Index p = 0; p < m.nnz(); ++p)
    CHECK(back.values[p] == doctest::Approx(m.values[p]).epsilon(1e-14));
}

TEST_CASE("symmetrize kills round-off asymmetry") {
  SparseMatrixCSC a = csc_from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0 + 1e-13}, {0, 0, 1.0}, {1, 1, 1.0}});
  CHECK(is_symmetric(symmetrize(a)));
}
