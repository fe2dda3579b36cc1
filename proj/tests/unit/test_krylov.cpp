#include <doctest.h>

#include "fcpm/krylov.hpp"
#include "fcpm/subsolvers.hpp"
#include "test_util.hpp"

using namespace fcpm;

TEST_CASE("GMRES with identity operator and preconditioner") {
  std::mt19937 rng(31);
  const Vector b = test::random_vector(10, rng);
  const auto res = gmres(identity_operator(), identity_operator(), b);
  CHECK(res.report.converged);
  CHECK(res.report.iterations == 1);
  CHECK(res.report.residual_history.size() == 2);
  CHECK((res.x - b).norm() <= 1e-14 * b.norm());
}

TEST_CASE("GMRES with an exact preconditioner needs at most two iterations") {
  std::mt19937 rng(32);
  for (Index n : {5, 40, 120, 300}) {
    const SparseMatrix a = test::random_sparse(n, n, 8.0 / static_cast<double>(n), rng, true);
    const DirectSolver lu(a);
    const Vector b = test::random_vector(n, rng);
    const auto res = gmres(as_operator(a), [&](const Vector& v) { return lu.solve(v); }, b);
    CHECK(res.report.converged);
    CHECK(res.report.iterations <= 2);
    CHECK((b - spmv(a, res.x)).norm() <= 1e-10 * b.norm());
  }
}

TEST_CASE("unpreconditioned GMRES on 2D Poisson matches a dense solve") {
  const SparseMatrix a = test::poisson2d(16);
  std::mt19937 rng(33);
  const Vector b = test::random_vector(a.rows(), rng);
  SolverOpts opts;
  opts.max_iters = 2000;
  const auto res = gmres(as_operator(a), identity_operator(), b, opts);
  CHECK(res.report.converged);
  const Vector ref = a.to_dense().partialPivLu().solve(b);
  CHECK((res.x - ref).norm() <= 1e-8 * ref.norm());
  // Residual estimates never increase inside a restart cycle.
  const auto& h = res.report.residual_history;
  CHECK(h.size() == static_cast<std::size_t>(res.report.iterations) + 1);
  for (std::size_t k = 1; k < h.size(); ++k)
    if (k % static_cast<std::size_t>(opts.restart) != 0) CHECK(h[k] <= h[k - 1] * (1.0 + 1e-12));
}

TEST_CASE("GMRES honours the iteration cap and rejects non-finite data") {
  const SparseMatrix a = test::poisson2d(32);
  std::mt19937 rng(36);
  const Vector b = test::random_vector(a.rows(), rng);
  const auto res = gmres(as_operator(a), identity_operator(), b);
  CHECK_FALSE(res.report.converged);
  CHECK(res.report.stop_reason == StopReason::MaxIters);
  CHECK(res.report.iterations == 90);
  Vector bad = b;
  bad(3) = std::nan("");
  CHECK_THROWS_AS(gmres(as_operator(a), identity_operator(), bad), NumericalError);
  const LinearOperator poison = [](const Vector& v) {
    Vector w = v;
    w(0) = std::numeric_limits<double>::infinity();
    return w;
  };
  CHECK_THROWS_AS(gmres(poison, identity_operator(), b), NumericalError);
}

TEST_CASE("GMRES reports breakdown on a singular operator") {
  // A projects out the first component, b lies partly outside the range.
  Vector d = Vector::Ones(4);
  d(0) = 0.0;
  const SparseMatrix a = diagonal_matrix(d);
  const auto res = gmres(as_operator(a), identity_operator(), Vector::Ones(4));
  CHECK_FALSE(res.report.converged);
  CHECK(res.report.stop_reason == StopReason::Breakdown);
}

TEST_CASE("right and left preconditioning agree with an exact preconditioner") {
  std::mt19937 rng(34);
  const SparseMatrix a = test::random_sparse(60, 60, 0.1, rng, true);
  const DirectSolver lu(a);
  const LinearOperator p = [&](const Vector& v) { return lu.solve(v); };
  const Vector b = test::random_vector(60, rng);
  const auto right = gmres(as_operator(a), p, b);
  const auto left = gmres_left(as_operator(a), p, b);
  CHECK(right.report.converged);
  CHECK(left.report.converged);
  CHECK((right.x - left.x).norm() <= 1e-8 * right.x.norm());
}

TEST_CASE("Richardson iteration") {
  std::mt19937 rng(35);
  const SparseMatrix a = test::random_sparse(30, 30, 0.2, rng, true);
  const DirectSolver lu(a);
  const Vector b = test::random_vector(30, rng);
  const auto exact = richardson(as_operator(a), [&](const Vector& v) { return lu.solve(v); }, b);
  CHECK(exact.report.converged);
  CHECK(exact.report.iterations == 1);
  const auto ident = richardson(identity_operator(), identity_operator(), b);
  CHECK(ident.report.iterations == 1);

  // Jacobi-preconditioned Richardson on a diagonally dominant matrix contracts.
  const Vector inv_diag = diagonal(a).cwiseInverse();
  const LinearOperator jacobi = [&](const Vector& v) { return Vector(inv_diag.cwiseProduct(v)); };
  SolverOpts plain = SolverOpts::richardson_defaults();
  plain.norm = ResidualNorm::Unpreconditioned;
  const auto jac = richardson(as_operator(a), jacobi, b, plain);
  CHECK(jac.report.converged);
  CHECK((b - spmv(a, jac.x)).norm() <= 1e-10 * b.norm());
  CHECK(jac.report.residual_history.back() == doctest::Approx((b - spmv(a, jac.x)).norm()));

  // Default stopping test looks at the next update instead.
  const auto left = richardson(as_operator(a), jacobi, b);
  CHECK(left.report.converged);
  const Vector next = jacobi(b - spmv(a, left.x));
  CHECK(next.norm() <= std::max(1e-10 * jacobi(b).norm(), 1e-10));
  CHECK(left.report.residual_history.back() == doctest::Approx((b - spmv(a, left.x)).norm()));

  // Over-relaxed identity diverges and trips the detector.
  const auto div = richardson(as_operator(a), [](const Vector& v) { return Vector(10.0 * v); }, b);
  CHECK_FALSE(div.report.converged);
  CHECK(div.report.stop_reason == StopReason::Breakdown);
  CHECK(div.report.residual_history.back() > 1e6 * div.report.residual_history.front());
}
