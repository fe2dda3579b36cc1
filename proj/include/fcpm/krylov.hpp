#pragma once

// Outer iterations: restarted GMRES and preconditioned Richardson.

#include <functional>
#include <string_view>
#include <vector>

#include "fcpm/sparse.hpp"

namespace fcpm {

using LinearOperator = std::function<Vector(const Vector&)>;

/// Wraps a matrix as an operator (the matrix must outlive the operator).
inline LinearOperator as_operator(const SparseMatrix& a) {
  return [&a](const Vector& x) { return spmv(a, x); };
}

inline LinearOperator identity_operator() {
  return [](const Vector& x) { return x; };
}

enum class StopReason { RelTol, AbsTol, MaxIters, Breakdown };

std::string_view to_string(StopReason r);

struct SolveReport {
  Index iterations = 0;
  /// Residual norm before the first iteration and after each one.
  std::vector<double> residual_history;
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIters;
};

/// Which residual the stopping test looks at. Preconditioned is only
/// meaningful for the left-preconditioned drivers.
enum class ResidualNorm { Unpreconditioned, Preconditioned };

struct SolverOpts {
  double rel_tol = 1e-10;
  double abs_tol = 1e-15;
  Index restart = 30;
  Index max_iters = 90;
  ResidualNorm norm = ResidualNorm::Unpreconditioned;

  static SolverOpts gmres_defaults() { return {}; }
  static SolverOpts richardson_defaults() { return {1e-10, 1e-10, 30, 90, ResidualNorm::Preconditioned}; }

  void validate() const;
};

struct SolveResult {
  Vector x;
  SolveReport report;
};

/// Right-preconditioned restarted GMRES (modified Gram-Schmidt, Givens
/// rotations). Convergence is judged on the true residual ||b - A x||.
SolveResult gmres(const LinearOperator& apply_a, const LinearOperator& apply_p, const Vector& b,
                  const SolverOpts& opts = {});

/// Left-preconditioned restarted GMRES; tolerances apply to ||P(b - A x)||.
SolveResult gmres_left(const LinearOperator& apply_a, const LinearOperator& apply_p, const Vector& b,
                       const SolverOpts& opts = {});

/// x <- x + P(b - A x) from x = 0. The history holds ||b - A x|| whatever
/// opts.norm says; with Preconditioned the tolerances apply to ||P(b - A x)||,
/// i.e. to the size of the next update. Stops with Breakdown once the residual
/// exceeds 1e6 times the initial one.
SolveResult richardson(const LinearOperator& apply_a, const LinearOperator& apply_p, const Vector& b,
                       const SolverOpts& opts = SolverOpts::richardson_defaults());

}  // namespace fcpm
