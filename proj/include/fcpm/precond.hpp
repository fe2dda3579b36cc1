#pragma once

// Block preconditioners for the contact poromechanics Jacobian.
//
// The right transform Q_r = I + E_{21} C_r with C_r = -bdiag(J22)^{-1} J21
// moves the contact singularity of J11 into a regular block J~11. The
// preconditioner P then eliminates the flow blocks through the fixed-stress
// Schur approximations S2/S3 and the mechanics through S1.

#include <memory>
#include <string>
#include <vector>

#include "fcpm/block_system.hpp"
#include "fcpm/subsolvers.hpp"

namespace fcpm {

struct TransformQr {
  BlockLayout layout;
  /// C_r = -bdiag(J22)^{-1} J21, the only non-identity block (row group 2, column group 1).
  SparseMatrix coupling;

  /// Q_r as one sparse matrix in group order.
  SparseMatrix to_matrix() const;
  /// Q_r^{-1}: the same matrix with the coupling block negated.
  SparseMatrix inverse_matrix() const;
};

TransformQr build_transform(const BlockMatrix5& j);

/// J~ = J Q_r. Only column group 1 changes.
BlockMatrix5 apply_transform(const BlockMatrix5& j, const TransformQr& q);

/// x = Q_r x~.
Vector recover_solution(const TransformQr& q, const Vector& x_tilde);

/// Per-cell inverses of the D x D diagonal blocks of J~11. Throws
/// SingularMatrixError naming the cell when one is not invertible.
BlockDiagInverse<double> invert_j11(const BlockMatrix5& j_tilde);

struct SchurS1 {
  SparseMatrix s22;
  SparseMatrix s32;
};

/// S1_22 = J22 - J~21 J~11^{-1} J12 and S1_32 = J32 - J~31 J~11^{-1} J12.
SchurS1 build_s1(const BlockMatrix5& j_tilde);
SchurS1 build_s1(const BlockMatrix5& j_tilde, const BlockDiagInverse<double>& j11_inv);

struct FixedStressParams {
  double shear_modulus = 0.0;  ///< G
  double lame = 0.0;           ///< Lambda
  double biot = 0.0;           ///< alpha
  double compressibility = 0.0;
  double porosity = 0.0;       ///< phi^0
  Index dim = 2;

  /// 1/M = (alpha - phi0)(1 - alpha) / (Lambda + 2G/3)
  double inverse_biot_modulus() const;
  /// alpha^2 / (2G/D + Lambda)
  double l_mat() const;
  /// jump_n alpha^2 c_f / (Lambda (1/M + phi0 c_f))
  double l_frac(double jump_n) const;
};

struct FixedStressData {
  Vector l_mat;   ///< per matrix pressure cell
  Vector l_frac;  ///< per fracture pressure cell
  Vector d55;     ///< diagonal of D55 over all of group 5
};

/// Diagonal fixed-stress stabilization for group 5 ordered (matrix cells,
/// fracture cells, intersections). Entries are l * measure / dt; l_frac is
/// floored at its value for `residual_aperture`; intersection entries are 0.
FixedStressData fixed_stress_coefficients(const FixedStressParams& p, const Vector& fracture_jump_n,
                                          const Vector& matrix_measure, const Vector& fracture_measure, double dt,
                                          double residual_aperture, Index n_intersections = 0);

/// S3 = (J55 + D55) - J54 diag(J44)^{-1} J45.
SparseMatrix build_s3(const BlockMatrix5& j, const Vector& d55);

enum class SubsolverKind { Direct, Amg };

struct PrecondOptions {
  SubsolverKind subsolver = SubsolverKind::Direct;
  double mechanics_strength = 0.7;
  double flow_strength = 0.25;
  double flow_truncation = 0.3;
  /// Function id per unknown of groups 2 and 3 (concatenated) for the
  /// unknown-based mechanics AMG; empty means index modulo D within each group.
  std::vector<int> mechanics_dof_function;
};

/// The Schur preconditioner P, acting in transformed variables.
class SchurPreconditioner {
 public:
  SchurPreconditioner(const BlockMatrix5& j, const Vector& d55, const PrecondOptions& opts = {});
  ~SchurPreconditioner();
  SchurPreconditioner(SchurPreconditioner&&) noexcept;
  SchurPreconditioner& operator=(SchurPreconditioner&&) noexcept;

  /// v = P^{-1} w, solving groups 5, 4, {2,3}, 1 in that order.
  Vector apply(const Vector& w) const;
  /// Q_r P^{-1} w: right preconditioner for the untransformed J.
  Vector apply_untransformed(const Vector& w) const;

  const TransformQr& transform() const { return q_; }
  const BlockMatrix5& transformed() const { return j_tilde_; }
  const BlockDiagInverse<double>& j11_inverse() const { return j11_inv_; }
  const SchurS1& s1() const { return s1_; }
  const SparseMatrix& s3() const { return s3_; }
  const SparseMatrix& mechanics_block() const { return mech_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// The block upper-triangular matrix whose inverse `apply` realizes
  /// (with exact subsolvers), in group order.
  SparseMatrix as_matrix() const;

 private:
  BlockLayout layout_;
  TransformQr q_;
  BlockMatrix5 j_tilde_;
  BlockDiagInverse<double> j11_inv_;
  SchurS1 s1_;
  SparseMatrix mech_;
  SparseMatrix s3_;
  SparseMatrix j12_, j25_, j35_, j45_;
  std::unique_ptr<Subsolver> mech_solver_;
  std::unique_ptr<Ilu0> ilu44_;
  std::unique_ptr<Subsolver> flow_solver_;
  std::vector<std::string> warnings_;
};

/// P-hat: one sweep of the fixed-stress sequential scheme. Solves the flow
/// block {4,5} with S55 = J55 + D55 first, then mechanics and contact {1,2,3}
/// with the flow coupling moved to the right-hand side. Exact subsolvers only.
class SequentialPreconditioner {
 public:
  SequentialPreconditioner(const BlockMatrix5& j, const Vector& d55);

  Vector apply(const Vector& w) const;
  /// The block upper-triangular matrix P-hat in group order.
  SparseMatrix as_matrix() const;

 private:
  BlockLayout layout_;
  SparseMatrix mech_;      // groups 1..3
  SparseMatrix flow_;      // groups 4..5 with stabilized J55
  SparseMatrix coupling_;  // rows 1..3, columns 4..5
  std::unique_ptr<DirectSolver> mech_solver_;
  std::unique_ptr<DirectSolver> flow_solver_;
};

/// Sub-block of the monolithic view over consecutive groups [first, last].
SparseMatrix group_range_block(const BlockMatrix5& m, int row_first, int row_last, int col_first, int col_last);

}  // namespace fcpm
