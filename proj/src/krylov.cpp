#include "fcpm/krylov.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fcpm {

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::RelTol: return "rel_tol";
    case StopReason::AbsTol: return "abs_tol";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::Breakdown: return "breakdown";
  }
  return "unknown";
}

void SolverOpts::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("solver tolerances must be positive");
  if (restart < 1 || max_iters < 1 || restart > max_iters)
    throw std::invalid_argument("solver needs 1 <= restart <= max_iters");
}

namespace {

void require_finite(const Vector& v, const char* where) {
  if (!v.allFinite()) throw NumericalError(std::string(where) + ": non-finite value");
}

// Restarted GMRES on `op`; `residual` gives the residual the tolerances apply
// to and `to_x` maps a Krylov combination to an update of x.
struct GmresProblem {
  LinearOperator op;        // v -> operator applied to Krylov vector
  LinearOperator residual;  // x -> residual vector for iterate x
  LinearOperator to_x;      // Krylov combination -> update of x
};

SolveResult run_gmres(const GmresProblem& prob, Index n, double norm_ref, const SolverOpts& opts) {
  opts.validate();
  SolveResult out;
  out.x = Vector::Zero(n);
  auto& rep = out.report;
  const double tol = std::max(opts.rel_tol * norm_ref, opts.abs_tol);
  const auto stop_reason = [&](double res) {
    return res <= opts.rel_tol * norm_ref ? StopReason::RelTol : StopReason::AbsTol;
  };

  Vector r = prob.residual(out.x);
  require_finite(r, "gmres");
  double beta = r.norm();
  rep.residual_history.push_back(beta);
  if (beta <= tol) {
    rep.converged = true;
    rep.stop_reason = stop_reason(beta);
    return out;
  }

  const Index m = opts.restart;
  DenseMatrix v(n, m + 1);
  DenseMatrix h = DenseMatrix::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1);

  while (rep.iterations < opts.max_iters) {
    const double cycle_start = beta;
    v.col(0) = r / beta;
    g.setZero();
    g(0) = beta;
    h.setZero();
    Index k = 0;
    bool happy = false;
    for (; k < m && rep.iterations < opts.max_iters; ++k) {
      Vector w = prob.op(v.col(k));
      require_finite(w, "gmres");
      for (Index i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v.col(i));
        w -= h(i, k) * v.col(i);
      }
      h(k + 1, k) = w.norm();
      const double hscale = h.col(k).head(k + 2).norm();
      happy = h(k + 1, k) <= 1e-14 * hscale;
      if (!happy) v.col(k + 1) = w / h(k + 1, k);
      for (Index i = 0; i < k; ++i) {
        const double tmp = cs(i) * h(i, k) + sn(i) * h(i + 1, k);
        h(i + 1, k) = -sn(i) * h(i, k) + cs(i) * h(i + 1, k);
        h(i, k) = tmp;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      if (denom == 0.0) {
        ++rep.iterations;
        rep.residual_history.push_back(std::abs(g(k)));
        happy = true;
        break;
      }
      cs(k) = h(k, k) / denom;
      sn(k) = h(k + 1, k) / denom;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g(k + 1) = -sn(k) * g(k);
      g(k) = cs(k) * g(k);
      ++rep.iterations;
      rep.residual_history.push_back(std::abs(g(k + 1)));
      if (happy || std::abs(g(k + 1)) <= tol) {
        ++k;
        break;
      }
    }
    const Index used = std::min(k, m);
    if (used > 0) {
      // Solve the triangular least-squares system and update x.
      Vector y = h.topLeftCorner(used, used).triangularView<Eigen::Upper>().solve(g.head(used));
      require_finite(y, "gmres");
      out.x += prob.to_x(v.leftCols(used) * y);
    }
    r = prob.residual(out.x);
    require_finite(r, "gmres");
    beta = r.norm();
    rep.residual_history.back() = beta;
    if (beta <= tol) {
      rep.converged = true;
      rep.stop_reason = stop_reason(beta);
      return out;
    }
    if (happy && !(beta < 0.5 * cycle_start)) {
      // Invariant Krylov space without progress on the true residual: the
      // preconditioned operator is singular there and restarting cannot help.
      rep.stop_reason = StopReason::Breakdown;
      return out;
    }
  }
  rep.converged = false;
  rep.stop_reason = StopReason::MaxIters;
  return out;
}

}  // namespace

SolveResult gmres(const LinearOperator& apply_a, const LinearOperator& apply_p, const Vector& b,
                  const SolverOpts& opts) {
  require_finite(b, "gmres");
  GmresProblem prob{[&](const Vector& v) { return apply_a(apply_p(v)); },
                    [&](const Vector& x) -> Vector { return b - apply_a(x); },
                    [&](const Vector& z) { return apply_p(z); }};
  return run_gmres(prob, b.size(), b.norm(), opts);
}

SolveResult gmres_left(const LinearOperator& apply_a, const LinearOperator& apply_p, const Vector& b,
                       const SolverOpts& opts) {
  require_finite(b, "gmres");
  GmresProblem prob{[&](const Vector& v) { return apply_p(apply_a(v)); },
                    [&](const Vector& x) -> Vector { return apply_p(b - apply_a(x)); },
                    [](const Vector& z) { return z; }};
  return run_gmres(prob, b.size(), apply_p(b).norm(), opts);
}

SolveResult richardson(const LinearOperator& apply_a, const LinearOperator& apply_p, const Vector& b,
                       const SolverOpts& opts) {
  if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0) || opts.max_iters < 1)
    throw std::invalid_argument("richardson: invalid options");
  require_finite(b, "richardson");
  SolveResult out;
  out.x = Vector::Zero(b.size());
  auto& rep = out.report;
  const bool precond = opts.norm == ResidualNorm::Preconditioned;
  Vector r = b;
  Vector z = precond ? apply_p(r) : Vector();
  double res = r.norm();
  double measured = precond ? z.norm() : res;
  const double rel = opts.rel_tol * measured;
  const double tol = std::max(rel, opts.abs_tol);
  const double initial = res;
  rep.residual_history.push_back(res);
  while (true) {
    if (measured <= tol) {
      rep.converged = true;
      rep.stop_reason = measured <= rel ? StopReason::RelTol : StopReason::AbsTol;
      return out;
    }
    if (rep.iterations >= opts.max_iters) {
      rep.stop_reason = StopReason::MaxIters;
      return out;
    }
    out.x += precond ? z : apply_p(r);
    r = b - apply_a(out.x);
    ++rep.iterations;
    if (!r.allFinite()) {
      rep.residual_history.push_back(std::numeric_limits<double>::infinity());
      rep.stop_reason = StopReason::Breakdown;
      return out;
    }
    res = r.norm();
    rep.residual_history.push_back(res);
    if (res > 1e6 * initial) {
      rep.stop_reason = StopReason::Breakdown;
      return out;
    }
    if (precond) z = apply_p(r);
    measured = precond ? z.norm() : res;
  }
}

}  // namespace fcpm
