#include "fcpm/contact.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fcpm {

void ContactParams::validate() const {
  if (!(friction >= 0.0)) throw std::invalid_argument("contact: friction coefficient must be >= 0");
  if (!(c > 0.0)) throw std::invalid_argument("contact: augmentation constant must be > 0");
  if (!(normal_stiffness >= 0.0)) throw std::invalid_argument("contact: normal stiffness must be >= 0");
  if (!(max_closure > 0.0)) throw std::invalid_argument("contact: maximum closure must be > 0");
  if (!(eps_open >= 0.0)) throw std::invalid_argument("contact: open threshold must be >= 0");
}

std::string_view to_string(ContactState s) {
  switch (s) {
    case ContactState::Open: return "open";
    case ContactState::Stick: return "stick";
    case ContactState::Slide: return "slide";
  }
  return "unknown";
}

namespace {

void check_input(const Vector& v, Index expected, const char* what) {
  if (v.size() != expected) throw DimensionError(std::string("contact: ") + what + " has wrong length");
  if (!v.allFinite()) throw NumericalError(std::string("contact: non-finite ") + what);
}

double closure_denominator(double lambda_n, const ContactParams& p) {
  const double den = p.max_closure * p.normal_stiffness - lambda_n;
  if (!(den > 0.0)) throw NumericalError("gap: nonpositive Barton-Bandis denominator");
  return den;
}

}  // namespace

double gap(const Vector& jump, double lambda_n, const ContactParams& p) {
  double g = p.g0;
  if (lambda_n < 0.0) g += p.max_closure * lambda_n / closure_denominator(lambda_n, p);
  if (p.dilation != 0.0 && jump.size() > 1) g += jump.tail(jump.size() - 1).norm() * std::tan(p.dilation);
  return g;
}

double gap_slope(double lambda_n, const ContactParams& p) {
  if (lambda_n >= 0.0) return 0.0;
  const double den = closure_denominator(lambda_n, p);
  return p.max_closure * p.max_closure * p.normal_stiffness / (den * den);
}

ContactCellState classify(const Vector& lambda0, const Vector& jump0, const Vector& slip_rate0,
                          const ContactParams& p) {
  const Index d = lambda0.size();
  if (d < 1) throw DimensionError("contact: empty traction vector");
  check_input(lambda0, d, "traction");
  check_input(jump0, d, "jump");
  check_input(slip_rate0, d - 1, "slip rate");

  ContactCellState s;
  s.lambda0 = lambda0;
  s.jump0 = jump0;
  s.slip_rate0 = slip_rate0;
  const double ln = lambda0(0);
  const Vector lt = lambda0.tail(d - 1);
  s.y = lt + p.c * slip_rate0;
  s.b0 = -p.friction * ln;
  s.eps_mismatch = lt.norm() - p.friction * std::abs(ln);
  s.beta_b = gap_slope(ln, p);
  s.normal_closed = ln + p.c * (jump0(0) - gap(jump0, ln, p)) < 0.0;
  if (s.b0 <= p.eps_open)
    s.state = ContactState::Open;
  else if (s.b0 > s.y.norm())
    s.state = ContactState::Stick;
  else
    s.state = ContactState::Slide;
  return s;
}

Vector complementarity_residual(const ContactCellState& cell, const Vector& lambda, const Vector& jump,
                                const Vector& slip_rate, const ContactParams& p) {
  const Index d = cell.lambda0.size();
  check_input(lambda, d, "traction");
  check_input(jump, d, "jump");
  check_input(slip_rate, d - 1, "slip rate");
  Vector r(d);
  const double ln = lambda(0);
  r(0) = cell.normal_closed ? -p.c * (jump(0) - gap(jump, ln, p)) : ln;

  const Vector lt = lambda.tail(d - 1);
  const double b = -p.friction * ln;
  switch (cell.state) {
    case ContactState::Open:
      r.tail(d - 1) = lt;
      break;
    case ContactState::Stick:
      r.tail(d - 1) = p.c * b * slip_rate;
      break;
    case ContactState::Slide: {
      const Vector y = lt + p.c * slip_rate;
      r.tail(d - 1) = -lt * y.norm() + b * y;
      break;
    }
  }
  return r;
}

Vector complementarity_residual(const Vector& lambda, const Vector& jump, const Vector& slip_rate,
                                const ContactParams& p) {
  return complementarity_residual(classify(lambda, jump, slip_rate, p), lambda, jump, slip_rate, p);
}

ContactLinearization linearize_cell(const ContactCellState& cell, const ContactParams& p) {
  const Index d = cell.lambda0.size();
  const Index t = d - 1;
  ContactLinearization lin{DenseMatrix::Zero(d, d), DenseMatrix::Zero(d, d)};

  if (cell.normal_closed) {
    lin.d_lambda(0, 0) = p.c * cell.beta_b;
    lin.d_jump(0, 0) = -p.c;
    const Vector jt = cell.jump0.tail(t);
    const double jt_norm = jt.norm();
    if (p.dilation != 0.0 && jt_norm > 0.0)
      lin.d_jump.block(0, 1, 1, t) = p.c * std::tan(p.dilation) * jt.transpose() / jt_norm;
  } else {
    lin.d_lambda(0, 0) = 1.0;
  }

  const Vector lt = cell.lambda0.tail(t);
  switch (cell.state) {
    case ContactState::Open:
      lin.d_lambda.block(1, 1, t, t).setIdentity();
      break;
    case ContactState::Stick:
      lin.d_lambda.block(1, 0, t, 1) = -p.c * p.friction * cell.slip_rate0;
      lin.d_jump.block(1, 1, t, t) = p.c * cell.b0 * DenseMatrix::Identity(t, t);
      break;
    case ContactState::Slide: {
      const double ny = cell.y.norm();
      if (!(ny > 0.0)) throw NumericalError("contact: sliding branch with |y| = 0");
      const Vector yhat = cell.y / ny;
      const DenseMatrix eye = DenseMatrix::Identity(t, t);
      lin.d_lambda.block(1, 0, t, 1) = -p.friction * cell.y;
      lin.d_lambda.block(1, 1, t, t) = (cell.b0 - ny) * eye - lt * yhat.transpose();
      lin.d_jump.block(1, 1, t, t) = p.c * (cell.b0 * eye - lt * yhat.transpose());
      break;
    }
  }
  return lin;
}

}  // namespace fcpm
