#include <doctest.h>

#include "fcpm/sparse.hpp"
#include "test_util.hpp"

using namespace fcpm;

TEST_CASE("spmv on identity, zero and a small dense case") {
  Vector x(3);
  x << 1, 2, 3;
  CHECK(spmv(SparseMatrix::identity(3), x) == x);
  CHECK(spmv(SparseMatrix(3, 3), x) == Vector::Zero(3));
  DenseMatrix a(2, 2);
  a << 1, 2, 3, 4;
  const Vector y = spmv(SparseMatrix::from_dense(a), Vector::Ones(2));
  CHECK(y(0) == 3.0);
  CHECK(y(1) == 7.0);
  CHECK_THROWS_AS(spmv(SparseMatrix::identity(3), Vector::Ones(2)), DimensionError);
}

TEST_CASE("sparse product on identities and a hand example") {
  std::mt19937 rng(1);
  const SparseMatrix a = test::random_sparse(7, 7, 0.3, rng);
  CHECK(multiply(a, SparseMatrix::identity(7)).to_dense() == a.to_dense());
  CHECK(multiply(SparseMatrix::identity(7), a).to_dense() == a.to_dense());
  DenseMatrix l(2, 2), r(2, 2), expected(2, 2);
  l << 1, 2, 0, 1;
  r << 1, 0, 3, 1;
  expected << 7, 2, 3, 1;
  CHECK(multiply(SparseMatrix::from_dense(l), SparseMatrix::from_dense(r)).to_dense() == expected);
  CHECK_THROWS_AS(multiply(SparseMatrix(2, 3), SparseMatrix(2, 3)), DimensionError);
}

TEST_CASE("cancellation zeros stay stored") {
  DenseMatrix l(1, 2), r(2, 1);
  l << 1, -1;
  r << 1, 1;
  const SparseMatrix p = multiply(SparseMatrix::from_dense(l), SparseMatrix::from_dense(r));
  CHECK(p.nnz() == 1);
  CHECK(p.coeff(0, 0) == 0.0);
}

TEST_CASE("extract_submatrix") {
  std::mt19937 rng(2);
  const SparseMatrix a = test::random_sparse(6, 6, 0.4, rng);
  const auto all = index_range(0, 6);
  CHECK(extract_submatrix(a, std::span<const Index>(all), std::span<const Index>(all)) == a);
  const std::vector<Index> none;
  const SparseMatrix empty = extract_submatrix(a, std::span<const Index>(none), std::span<const Index>(all));
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 6);
  Vector d(3);
  d << 1, 2, 3;
  const std::vector<Index> sel{1, 2};
  const SparseMatrix sub = extract_submatrix(diagonal_matrix(d), std::span<const Index>(sel), std::span<const Index>(sel));
  DenseMatrix expected(2, 2);
  expected << 2, 0, 0, 3;
  CHECK(sub.to_dense() == expected);
  const std::vector<Index> bad{0, 9};
  CHECK_THROWS_AS(extract_submatrix(a, std::span<const Index>(bad), std::span<const Index>(all)), DimensionError);
}

TEST_CASE("random kernels agree with dense arithmetic") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + trial * 2, m = 3 + trial;
    const SparseMatrix a = test::random_sparse(n, m, 0.25, rng);
    const SparseMatrix b = test::random_sparse(m, n, 0.25, rng);
    const Vector x = test::random_vector(m, rng);
    CHECK((spmv(a, x) - a.to_dense() * x).norm() <= 1e-13 * std::max(1.0, (a.to_dense() * x).norm()));
    CHECK(test::rel_diff(multiply(a, b).to_dense(), a.to_dense() * b.to_dense()) <= 1e-13);
    CHECK(test::rel_diff(add(a, a.scaled(2.0), 1.0, -0.5).to_dense(), DenseMatrix::Zero(n, m)) <= 1e-13);
    CHECK(a.transpose().to_dense() == a.to_dense().transpose());
    std::vector<Index> rows, cols;
    for (Index i = 0; i < n; i += 2) rows.push_back(i);
    for (Index j = 1; j < m; j += 3) cols.push_back(j);
    const DenseMatrix sub = extract_submatrix(a, std::span<const Index>(rows), std::span<const Index>(cols)).to_dense();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        CHECK(sub(static_cast<Index>(i), static_cast<Index>(j)) == a.coeff(rows[i], cols[j]));
  }
}

TEST_CASE("block_diag_inverse") {
  const auto inv = block_diag_inverse(SparseMatrix::identity(4, 2.0), 2);
  CHECK(inv.num_blocks() == 2);
  CHECK(inv.block(1).isApprox(0.5 * DenseMatrix::Identity(2, 2)));

  DenseMatrix blk(2, 2), expected(2, 2);
  blk << 2, 1, 1, 2;
  expected << 2.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3;
  CHECK((block_diag_inverse(SparseMatrix::from_dense(blk), 2).block(0) - expected).norm() < 1e-15);

  DenseMatrix sing(2, 2);
  sing << 1, 0, 0, 0;
  CHECK_THROWS_WITH_AS(block_diag_inverse(SparseMatrix::from_dense(sing), 2), doctest::Contains("singular diagonal block"),
                       SingularMatrixError);
  CHECK_THROWS_AS(block_diag_inverse(SparseMatrix::identity(3), 2), DimensionError);
}

TEST_CASE("block_diag_inverse ignores off-block entries and matches per-block solves") {
  std::mt19937 rng(4);
  const SparseMatrix a = test::random_sparse(12, 12, 0.5, rng, true);
  const auto inv = block_diag_inverse(a, 3);
  const DenseMatrix dense = a.to_dense();
  const Vector x = test::random_vector(12, rng);
  const Vector y = inv.apply(x);
  for (Index c = 0; c < 4; ++c) {
    const DenseMatrix blk = dense.block(3 * c, 3 * c, 3, 3);
    CHECK((blk * inv.block(c) - DenseMatrix::Identity(3, 3)).norm() <= 1e-12);
    const Vector ref = blk.partialPivLu().solve(x.segment(3 * c, 3));
    CHECK((y.segment(3 * c, 3) - ref).norm() <= 1e-12 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("CsrMatrix rejects malformed structure") {
  CHECK_THROWS_AS(SparseMatrix(2, 2, {0, 1, 1}, {3}, {1.0}), DimensionError);
  CHECK_THROWS_AS(SparseMatrix(1, 3, {0, 2}, {1, 0}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(SparseMatrix(1, 3, {0, 2}, {0, 1}, {1.0}), DimensionError);
  const auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 0, -1.0}});
  CHECK(m.nnz() == 2);
  CHECK(m.coeff(0, 0) == 3.0);
}
