#include <doctest.h>

#include "fcpm/subsolvers.hpp"
#include "test_util.hpp"

using namespace fcpm;

namespace {

SparseMatrix tridiag_poisson(Index n) {
  std::vector<Triplet<double>> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

// Reference ILU(0) written the textbook (KIJ, dense storage) way.
DenseMatrix dense_ilu0(const SparseMatrix& a) {
  DenseMatrix lu = a.to_dense();
  const Index n = lu.rows();
  auto in_pattern = [&](Index i, Index j) { return a.find(i, j) >= 0; };
  for (Index k = 0; k < n; ++k)
    for (Index i = k + 1; i < n; ++i) {
      if (!in_pattern(i, k)) continue;
      lu(i, k) /= lu(k, k);
      for (Index j = k + 1; j < n; ++j)
        if (in_pattern(i, j) && in_pattern(k, j)) lu(i, j) -= lu(i, k) * lu(k, j);
    }
  return lu;
}

}  // namespace

TEST_CASE("direct solver") {
  const Vector b = Vector::LinSpaced(5, 1.0, 5.0);
  CHECK(DirectSolver(SparseMatrix::identity(5)).solve(b) == b);
  Vector d(2), rhs(2);
  d << 2, 4;
  rhs << 2, 4;
  CHECK((DirectSolver(diagonal_matrix(d)).solve(rhs) - Vector::Ones(2)).norm() < 1e-15);

  std::mt19937 rng(21);
  const SparseMatrix r = test::random_sparse(20, 20, 0.2, rng);
  const SparseMatrix spd = add(multiply(r.transpose(), r), SparseMatrix::identity(20));
  const Vector x_ref = spd.to_dense().partialPivLu().solve(b.head(5).replicate(4, 1));
  const Vector x = DirectSolver(spd).solve(b.head(5).replicate(4, 1));
  CHECK((x - x_ref).norm() <= 1e-11 * x_ref.norm());

  DenseMatrix sing = DenseMatrix::Identity(3, 3);
  sing(2, 2) = 0.0;
  sing(2, 0) = 0.0;
  CHECK_THROWS_AS(DirectSolver(SparseMatrix::from_dense(sing)), SingularMatrixError);
}

TEST_CASE("direct solver backward error on random systems") {
  std::mt19937 rng(22);
  for (Index n : {10, 50, 120, 200}) {
    const SparseMatrix a = test::random_sparse(n, n, 0.05, rng, true);
    const Vector b = test::random_vector(n, rng);
    const Vector x = DirectSolver(a).solve(b);
    const double norm_a = a.to_dense().lpNorm<Eigen::Infinity>();
    const double berr = (spmv(a, x) - b).lpNorm<Eigen::Infinity>() /
                        (norm_a * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>());
    CHECK(berr <= 1e-12);
  }
}

TEST_CASE("ILU(0) exact on triangular and diagonal matrices") {
  std::mt19937 rng(23);
  DenseMatrix lower = test::random_sparse(8, 8, 0.4, rng).to_dense().triangularView<Eigen::Lower>();
  lower.diagonal().array() += 3.0;
  const SparseMatrix l = SparseMatrix::from_dense(lower);
  const Vector b = test::random_vector(8, rng);
  CHECK((Ilu0(l).solve(b) - DirectSolver(l).solve(b)).norm() <= 1e-13);
  const SparseMatrix u = l.transpose();
  CHECK((Ilu0(u).solve(b) - DirectSolver(u).solve(b)).norm() <= 1e-13);
  Vector d(4);
  d << 1, -2, 4, 8;
  const Ilu0 diag(diagonal_matrix(d));
  CHECK(diag.solve(d) == Vector::Ones(4));
  CHECK(diag.upper() == diagonal_matrix(d));
}

TEST_CASE("ILU(0) reproduces A on its pattern") {
  const SparseMatrix a = tridiag_poisson(10);
  const Ilu0 f(a);
  const SparseMatrix lu = multiply(f.lower(), f.upper());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) CHECK(lu.coeff(i, a.col(k)) == a.value(k));

  // Poisson 2D: fill outside the pattern exists, the pattern positions match.
  const SparseMatrix p = test::poisson2d(8);
  const Ilu0 fp(p);
  const DenseMatrix prod = (fp.lower().to_dense() * fp.upper().to_dense());
  const DenseMatrix ref = dense_ilu0(p);
  for (Index i = 0; i < p.rows(); ++i)
    for (Index k = p.row_begin(i); k < p.row_end(i); ++k) {
      CHECK(std::abs(prod(i, p.col(k)) - p.value(k)) <= 1e-14 * std::abs(p.value(k)));
      CHECK(std::abs(fp.factors().value(k) - ref(i, p.col(k))) <= 1e-14 * std::abs(ref(i, p.col(k))));
    }

  DenseMatrix zd = DenseMatrix::Identity(3, 3);
  zd(1, 1) = 0.0;
  zd(1, 0) = 1.0;
  CHECK_THROWS_WITH_AS(Ilu0(SparseMatrix::from_dense(zd)), doctest::Contains("row 1"), SingularMatrixError);
}

TEST_CASE("AMG setup on degenerate inputs") {
  const AmgHierarchy one(SparseMatrix::identity(1, 3.0));
  CHECK(one.num_levels() == 1);
  Vector b(1);
  b << 6.0;
  CHECK(std::abs(one.solve(b)(0) - 2.0) < 1e-15);

  AmgOptions o;
  o.coarsest_size = 2;
  Vector d = Vector::LinSpaced(50, 1.0, 50.0);
  const AmgHierarchy diag(diagonal_matrix(d), o);
  CHECK(diag.num_levels() == 1);
  CHECK(diag.warnings().size() == 1);
  CHECK((spmv(diagonal_matrix(d), diag.solve(d)) - d).norm() < 1e-12);
}

TEST_CASE("AMG hierarchy on 2D Poisson") {
  const SparseMatrix a = test::poisson2d(32);
  const AmgHierarchy h(a, AmgOptions::flow());
  CHECK(h.num_levels() >= 2);
  for (Index l = 0; l + 1 < h.num_levels(); ++l) {
    CHECK(h.level(l + 1).a.rows() < h.level(l).a.rows());
    const SparseMatrix rap = multiply(h.level(l).r, multiply(h.level(l).a, h.level(l).p));
    CHECK(test::rel_diff(rap.to_dense(), h.level(l + 1).a.to_dense()) <= 1e-12);
  }
  std::mt19937 rng(24);
  CHECK(h.vcycle(Vector::Zero(a.rows()), Vector::Zero(a.rows())) == Vector::Zero(a.rows()));
  const Vector b = test::random_vector(a.rows(), rng);
  Vector x = test::random_vector(a.rows(), rng);
  const double r0 = (b - spmv(a, x)).norm();
  for (int c = 0; c < 10; ++c) x = h.vcycle(b, x);
  CHECK((b - spmv(a, x)).norm() <= 1e-6 * r0);

  const Vector b2 = test::random_vector(a.rows(), rng);
  const Vector sum = h.solve(b + b2), parts = h.solve(b) + h.solve(b2);
  CHECK((sum - parts).norm() <= 1e-12 * parts.norm());
}

TEST_CASE("single-level AMG equals the direct solve") {
  const SparseMatrix a = test::poisson2d(5);
  AmgOptions o;
  o.coarsest_size = 100;
  const AmgHierarchy h(a, o);
  CHECK(h.num_levels() == 1);
  const Vector b = Vector::Ones(25);
  CHECK((h.solve(b) - DirectSolver(a).solve(b)).norm() <= 1e-13);
}

TEST_CASE("strength and splitting respect dof functions") {
  // Two decoupled copies of a 1D Laplacian interleaved; cross couplings are
  // negative but belong to different functions and must be ignored.
  const Index n = 20;
  std::vector<Triplet<double>> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({2 * i, 2 * i, 2.0});
    t.push_back({2 * i + 1, 2 * i + 1, 2.0});
    t.push_back({2 * i, 2 * i + 1, -5.0});
    t.push_back({2 * i + 1, 2 * i, -5.0});
    if (i > 0) {
      t.push_back({2 * i, 2 * i - 2, -1.0});
      t.push_back({2 * i + 1, 2 * i - 1, -1.0});
    }
    if (i + 1 < n) {
      t.push_back({2 * i, 2 * i + 2, -1.0});
      t.push_back({2 * i + 1, 2 * i + 3, -1.0});
    }
  }
  const SparseMatrix a = SparseMatrix::from_triplets(2 * n, 2 * n, std::move(t));
  std::vector<int> f(2 * n);
  for (Index i = 0; i < 2 * n; ++i) f[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
  const SparseMatrix s = strength_matrix(a, 0.7, f);
  for (Index i = 0; i < s.rows(); ++i)
    for (Index k = s.row_begin(i); k < s.row_end(i); ++k) CHECK(f[static_cast<std::size_t>(s.col(k))] == f[static_cast<std::size_t>(i)]);
  const auto coarse = rs_coarsen(s);
  // 1D chains coarsen to every other point.
  CHECK(std::count(coarse.begin(), coarse.end(), true) == n);
  const auto coarse_again = rs_coarsen(s);
  CHECK(coarse == coarse_again);
}

TEST_CASE("AMG stops at an indefinite Galerkin level and accepts a setup matrix") {
  // Positive diagonal, indefinite symmetric part: coarse diagonals turn negative.
  const Index n = 200;
  std::vector<Triplet<double>> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 1.0});
    if (i > 0) t.push_back({i, i - 1, -1.5});
    if (i + 1 < n) t.push_back({i, i + 1, -1.5});
  }
  const SparseMatrix a = SparseMatrix::from_triplets(n, n, std::move(t));
  const AmgHierarchy h(a);
  CHECK(h.indefinite_coarse());
  CHECK(h.num_levels() == 1);

  const AmgHierarchy hp(tridiag_poisson(n));
  CHECK_FALSE(hp.indefinite_coarse());

  const AmgHierarchy mixed(a, tridiag_poisson(n));
  CHECK(mixed.num_levels() == hp.num_levels());
  CHECK(mixed.level(0).a.to_dense() == a.to_dense());
  CHECK(mixed.level(1).a.to_dense() == hp.level(1).a.to_dense());
  std::mt19937 rng(31);
  CHECK(mixed.solve(test::random_vector(n, rng)).allFinite());
  CHECK_THROWS_AS(AmgHierarchy(a, tridiag_poisson(n - 1)), DimensionError);
}
