#pragma once

// Per-cell frictional contact algebra in augmented Lagrangian form.
//
// Vectors of length D are ordered (normal, tangential...). Tractions are
// positive in tension, so a compressed fracture has lambda_n < 0 and the
// friction bound b = -F * lambda_n is positive.

#include <string_view>

#include "fcpm/sparse.hpp"

namespace fcpm {

struct ContactParams {
  double friction = 0.577;       ///< F
  double c = 1.0;                ///< augmentation constant, traction per length
  double normal_stiffness = 0.0; ///< K_n, traction per length
  double max_closure = 5e-4;     ///< Delta u_max, m
  double dilation = 0.0;         ///< theta, rad
  double g0 = 0.0;               ///< steady-state gap, m
  double eps_open = 1e-5;        ///< friction bound below which the cell counts as open

  void validate() const;
};

enum class ContactState { Open, Stick, Slide };

std::string_view to_string(ContactState s);

/// Branch selection and frozen data at a linearization point.
struct ContactCellState {
  ContactState state = ContactState::Open;
  bool normal_closed = false;
  Vector lambda0;      ///< (lambda_n, lambda_tau)
  Vector jump0;        ///< displacement jump (normal, tangential)
  Vector slip_rate0;   ///< tangential jump increment over the time step
  Vector y;            ///< lambda_tau0 + c * slip_rate0
  double eps_mismatch = 0.0;  ///< |lambda_tau0| - F |lambda_n0|
  double beta_b = 0.0;        ///< d gap / d lambda_n
  double b0 = 0.0;            ///< -F * lambda_n0
};

/// g = g0 + Du_max lambda_n / (Du_max K_n - lambda_n) + |jump_tau| tan(theta).
/// The closure term acts under compression only (lambda_n < 0).
double gap(const Vector& jump, double lambda_n, const ContactParams& p);

/// Derivative of the gap with respect to lambda_n.
double gap_slope(double lambda_n, const ContactParams& p);

ContactCellState classify(const Vector& lambda0, const Vector& jump0, const Vector& slip_rate0,
                          const ContactParams& p);

/// (C_n, C_tau) evaluated on the branch frozen in `cell`.
Vector complementarity_residual(const ContactCellState& cell, const Vector& lambda, const Vector& jump,
                                const Vector& slip_rate, const ContactParams& p);

/// Complementarity functions in max form, classified at the given point.
Vector complementarity_residual(const Vector& lambda, const Vector& jump, const Vector& slip_rate,
                                const ContactParams& p);

struct ContactLinearization {
  DenseMatrix d_lambda;  ///< D x D
  DenseMatrix d_jump;    ///< D x D, columns (jump_n, jump_tau); the slip rate moves with jump_tau
};

/// Exact derivatives of the frozen-branch residual at the linearization point.
ContactLinearization linearize_cell(const ContactCellState& cell, const ContactParams& p);

}  // namespace fcpm
