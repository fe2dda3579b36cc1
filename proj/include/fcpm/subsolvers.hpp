#pragma once

// Inner solvers used by the block preconditioners: sparse LU, ILU(0) and a
// classical Ruge-Stuben AMG V-cycle.

#include <memory>
#include <string>
#include <vector>

#include "fcpm/sparse.hpp"

namespace fcpm {

/// Approximate inverse of a square operator, applied to one vector at a time.
class Subsolver {
 public:
  virtual ~Subsolver() = default;
  virtual Vector solve(const Vector& b) const = 0;
  virtual Index size() const = 0;
};

/// Sparse LU with column approximate-minimum-degree ordering.
class DirectSolver final : public Subsolver {
 public:
  explicit DirectSolver(const SparseMatrix& a);
  ~DirectSolver() override;
  DirectSolver(DirectSolver&&) noexcept;
  DirectSolver& operator=(DirectSolver&&) noexcept;

  Vector solve(const Vector& b) const override;
  Index size() const override { return n_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Index n_ = 0;
};

/// Zero-fill incomplete LU. L (unit diagonal, not stored) and U share the
/// sparsity pattern of the source matrix.
class Ilu0 final : public Subsolver {
 public:
  explicit Ilu0(const SparseMatrix& a);

  Vector solve(const Vector& b) const override;
  Index size() const override { return lu_.rows(); }

  /// Strict lower part holds L, upper part including the diagonal holds U.
  const SparseMatrix& factors() const { return lu_; }
  SparseMatrix lower() const;  // with the unit diagonal stored
  SparseMatrix upper() const;

 private:
  SparseMatrix lu_;
  std::vector<Index> diag_pos_;
};

struct AmgOptions {
  double strength_threshold = 0.25;
  /// Interpolation weights below truncation * (largest weight in the row) are dropped; 0 keeps all.
  double truncation = 0.0;
  Index max_levels = 25;
  Index coarsest_size = 40;
  /// Unknown-to-function map for systems (e.g. displacement component per dof).
  /// Empty means a scalar problem. Strength and interpolation only couple equal functions.
  std::vector<int> dof_function;

  static AmgOptions mechanics(std::vector<int> dof_function);
  static AmgOptions flow();
};

struct AmgLevel {
  SparseMatrix a;
  SparseMatrix p;  ///< prolongation to this level from the next coarser one
  SparseMatrix r;  ///< restriction, the transpose of p
  std::vector<int> dof_function;
};

class AmgHierarchy final : public Subsolver {
 public:
  AmgHierarchy(const SparseMatrix& a, AmgOptions opts = {});
  /// Coarse levels and transfers come from `setup`; the finest level smooths
  /// and measures residuals with `a`.
  AmgHierarchy(const SparseMatrix& a, const SparseMatrix& setup, AmgOptions opts = {});
  ~AmgHierarchy() override;
  AmgHierarchy(AmgHierarchy&&) noexcept;
  AmgHierarchy& operator=(AmgHierarchy&&) noexcept;

  /// One V-cycle started from x0.
  Vector vcycle(const Vector& b, const Vector& x0) const;
  /// One V-cycle from a zero initial guess.
  Vector solve(const Vector& b) const override;
  Index size() const override { return levels_.front().a.rows(); }

  Index num_levels() const { return static_cast<Index>(levels_.size()); }
  const AmgLevel& level(Index l) const { return levels_[static_cast<std::size_t>(l)]; }
  /// Coarsening problems met during setup (stagnation, empty coarse grid).
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Coarsening stopped early because a Galerkin operator lost its positive
  /// diagonal (the fine matrix was positive on its diagonal).
  bool indefinite_coarse() const { return indefinite_coarse_; }

 private:
  void build(const SparseMatrix& a);
  void cycle(std::size_t l, const Vector& b, Vector& x) const;

  AmgOptions opts_;
  std::vector<AmgLevel> levels_;
  std::unique_ptr<DirectSolver> coarse_;
  std::vector<std::string> warnings_;
  bool indefinite_coarse_ = false;
};

/// Classical strength of connection: j strongly influences i when
/// -a_ij >= theta * max_{k != i} (-a_ik), restricted to equal functions.
/// Returned as a pattern matrix (values 1).
SparseMatrix strength_matrix(const SparseMatrix& a, double theta, const std::vector<int>& dof_function);

/// First-pass Ruge-Stuben C/F splitting; true marks a coarse point.
std::vector<bool> rs_coarsen(const SparseMatrix& strength);

/// Direct interpolation for the given splitting.
SparseMatrix direct_interpolation(const SparseMatrix& a, const SparseMatrix& strength, const std::vector<bool>& coarse,
                                  const std::vector<int>& dof_function, double truncation);

/// One forward then one backward Gauss-Seidel sweep, in place.
void symmetric_gauss_seidel(const SparseMatrix& a, const Vector& b, Vector& x);

}  // namespace fcpm
