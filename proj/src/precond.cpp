#include "fcpm/precond.hpp"

#include <cmath>
#include <stdexcept>

namespace fcpm {

namespace {

// Monolithic matrix from a rectangular grid of blocks with given row/column sizes.
SparseMatrix stack_blocks(const std::vector<std::vector<const SparseMatrix*>>& grid, const std::vector<Index>& row_sizes,
                          const std::vector<Index>& col_sizes) {
  std::vector<Index> col_off(col_sizes.size() + 1, 0);
  for (std::size_t j = 0; j < col_sizes.size(); ++j) col_off[j + 1] = col_off[j] + col_sizes[j];
  Index n_rows = 0;
  for (Index s : row_sizes) n_rows += s;
  std::vector<Index> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  Index row = 0;
  for (std::size_t bi = 0; bi < row_sizes.size(); ++bi) {
    for (Index r = 0; r < row_sizes[bi]; ++r, ++row) {
      for (std::size_t bj = 0; bj < col_sizes.size(); ++bj) {
        const SparseMatrix* b = grid[bi][bj];
        if (b == nullptr) continue;
        if (b->rows() != row_sizes[bi] || b->cols() != col_sizes[bj])
          throw DimensionError("stack_blocks: block shape mismatch");
        for (Index k = b->row_begin(r); k < b->row_end(r); ++k) {
          cols.push_back(col_off[bj] + b->col(k));
          vals.push_back(b->value(k));
        }
      }
      offsets[static_cast<std::size_t>(row) + 1] = static_cast<Index>(cols.size());
    }
  }
  return SparseMatrix(n_rows, col_off.back(), std::move(offsets), std::move(cols), std::move(vals));
}

const SparseMatrix* ptr_or_null(const BlockMatrix5& m, int i, int j) {
  const auto& b = m.get(i, j);
  return b ? &*b : nullptr;
}

// A - B without touching absent operands.
SparseMatrix subtract(const SparseMatrix& a, const SparseMatrix& b) { return add(a, b, 1.0, -1.0); }

std::string stage_message(const char* stage, const std::exception& e) {
  return std::string("preconditioner stage ") + stage + ": " + e.what();
}

}  // namespace

SparseMatrix group_range_block(const BlockMatrix5& m, int row_first, int row_last, int col_first, int col_last) {
  std::vector<std::vector<const SparseMatrix*>> grid;
  std::vector<Index> rs, cs;
  for (int j = col_first; j <= col_last; ++j) cs.push_back(m.layout().size(j));
  for (int i = row_first; i <= row_last; ++i) {
    rs.push_back(m.layout().size(i));
    std::vector<const SparseMatrix*> row;
    for (int j = col_first; j <= col_last; ++j) row.push_back(ptr_or_null(m, i, j));
    grid.push_back(std::move(row));
  }
  return stack_blocks(grid, rs, cs);
}

// ---------------------------------------------------------------- transform

SparseMatrix TransformQr::to_matrix() const {
  BlockMatrix5 m(layout);
  for (int g = 1; g <= kNumGroups; ++g) m.set(g, g, SparseMatrix::identity(layout.size(g)));
  if (coupling.nnz() > 0) m.set(2, 1, coupling);
  return assemble_monolithic(m);
}

SparseMatrix TransformQr::inverse_matrix() const {
  BlockMatrix5 m(layout);
  for (int g = 1; g <= kNumGroups; ++g) m.set(g, g, SparseMatrix::identity(layout.size(g)));
  if (coupling.nnz() > 0) m.set(2, 1, coupling.scaled(-1.0));
  return assemble_monolithic(m);
}

TransformQr build_transform(const BlockMatrix5& j) {
  const auto& layout = j.layout();
  TransformQr q{layout, SparseMatrix(layout.size(2), layout.size(1))};
  if (!j.has(2, 1) || layout.size(2) == 0) return q;
  if (!j.has(2, 2)) throw SingularMatrixError("build_transform: block (2,2) is absent");
  BlockDiagInverse<double> d22_inv;
  try {
    d22_inv = block_diag_inverse(j.block(2, 2), layout.spatial_dim);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string("build_transform: J22 ") + e.what());
  }
  q.coupling = multiply(d22_inv.to_sparse(), j.block(2, 1)).scaled(-1.0);
  return q;
}

BlockMatrix5 apply_transform(const BlockMatrix5& j, const TransformQr& q) {
  BlockMatrix5 jt = j;
  if (q.coupling.nnz() == 0) return jt;
  for (int i = 1; i <= kNumGroups; ++i) {
    if (!j.has(i, 2)) continue;
    SparseMatrix correction = multiply(j.block(i, 2), q.coupling);
    jt.set(i, 1, j.has(i, 1) ? add(j.block(i, 1), correction) : std::move(correction));
  }
  return jt;
}

Vector recover_solution(const TransformQr& q, const Vector& x_tilde) {
  const auto& layout = q.layout;
  if (x_tilde.size() != layout.total()) throw DimensionError("recover_solution: length mismatch");
  Vector x = x_tilde;
  if (q.coupling.nnz() == 0) return x;
  Vector x2 = x.segment(layout.offset(2), layout.size(2));
  spmv_add(q.coupling, x_tilde.segment(layout.offset(1), layout.size(1)), 1.0, x2);
  x.segment(layout.offset(2), layout.size(2)) = x2;
  return x;
}

// ---------------------------------------------------------------- S1

BlockDiagInverse<double> invert_j11(const BlockMatrix5& j_tilde) {
  const auto& layout = j_tilde.layout();
  try {
    return block_diag_inverse(j_tilde.block_or_zero(1, 1), layout.spatial_dim);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string("transformed contact block J~11: ") + e.what());
  }
}

SchurS1 build_s1(const BlockMatrix5& j_tilde) { return build_s1(j_tilde, invert_j11(j_tilde)); }

SchurS1 build_s1(const BlockMatrix5& j_tilde, const BlockDiagInverse<double>& j11_inv) {
  SchurS1 s{j_tilde.block_or_zero(2, 2), j_tilde.block_or_zero(3, 2)};
  if (!j_tilde.has(1, 2)) return s;
  const SparseMatrix inv_times_j12 = multiply(j11_inv.to_sparse(), j_tilde.block(1, 2));
  if (j_tilde.has(2, 1)) s.s22 = subtract(s.s22, multiply(j_tilde.block(2, 1), inv_times_j12));
  if (j_tilde.has(3, 1)) s.s32 = subtract(s.s32, multiply(j_tilde.block(3, 1), inv_times_j12));
  return s;
}

// ---------------------------------------------------------------- fixed stress

double FixedStressParams::inverse_biot_modulus() const {
  const double den = lame + 2.0 * shear_modulus / 3.0;
  if (!(den > 0.0)) throw std::invalid_argument("fixed stress: nonpositive bulk modulus");
  return (biot - porosity) * (1.0 - biot) / den;
}

double FixedStressParams::l_mat() const {
  const double den = 2.0 * shear_modulus / static_cast<double>(dim) + lame;
  if (!(den > 0.0)) throw std::invalid_argument("fixed stress: nonpositive drained modulus");
  return biot * biot / den;
}

double FixedStressParams::l_frac(double jump_n) const {
  const double den = lame * (inverse_biot_modulus() + porosity * compressibility);
  if (biot == 0.0) return 0.0;
  if (!(den > 0.0)) throw std::invalid_argument("fixed stress: nonpositive fracture coefficient denominator");
  return jump_n * biot * biot * compressibility / den;
}

FixedStressData fixed_stress_coefficients(const FixedStressParams& p, const Vector& fracture_jump_n,
                                          const Vector& matrix_measure, const Vector& fracture_measure, double dt,
                                          double residual_aperture, Index n_intersections) {
  if (!(dt > 0.0)) throw std::invalid_argument("fixed stress: time step must be positive");
  if (fracture_jump_n.size() != fracture_measure.size())
    throw DimensionError("fixed stress: fracture jump and measure lengths differ");
  FixedStressData d;
  const double lm = p.l_mat();
  d.l_mat = Vector::Constant(matrix_measure.size(), lm);
  const double floor = p.l_frac(residual_aperture);
  d.l_frac.resize(fracture_jump_n.size());
  for (Index i = 0; i < fracture_jump_n.size(); ++i) d.l_frac(i) = std::max(p.l_frac(fracture_jump_n(i)), floor);
  const Index nm = matrix_measure.size(), nf = fracture_measure.size();
  d.d55 = Vector::Zero(nm + nf + n_intersections);
  d.d55.head(nm) = d.l_mat.cwiseProduct(matrix_measure) / dt;
  d.d55.segment(nm, nf) = d.l_frac.cwiseProduct(fracture_measure) / dt;
  return d;
}

SparseMatrix build_s3(const BlockMatrix5& j, const Vector& d55) {
  const auto& layout = j.layout();
  if (d55.size() != layout.size(5)) throw DimensionError("build_s3: D55 length does not match group 5");
  SparseMatrix s3 = add(j.block_or_zero(5, 5), diagonal_matrix(d55));
  if (layout.size(4) == 0 || !j.has(5, 4) || !j.has(4, 5)) return s3;
  const Vector d44 = diagonal(j.block_or_zero(4, 4));
  Vector inv(d44.size());
  for (Index i = 0; i < d44.size(); ++i) {
    if (d44(i) == 0.0) throw SingularMatrixError("build_s3: zero diagonal in J44 row " + std::to_string(i));
    inv(i) = 1.0 / d44(i);
  }
  return subtract(s3, multiply(j.block(5, 4), scale_rows(j.block(4, 5), inv)));
}

// ---------------------------------------------------------------- P

namespace {

std::vector<int> default_mechanics_functions(const BlockLayout& layout) {
  std::vector<int> f;
  for (int g : {2, 3})
    for (Index i = 0; i < layout.size(g); ++i) f.push_back(static_cast<int>(i % layout.spatial_dim));
  return f;
}

// `fallback` supplies the coarse levels when the hierarchy of `a` itself
// turns indefinite below the finest level.
std::unique_ptr<Subsolver> make_subsolver(const SparseMatrix& a, SubsolverKind kind, AmgOptions amg,
                                          std::vector<std::string>& warnings, const char* tag,
                                          const SparseMatrix* fallback = nullptr) {
  if (kind == SubsolverKind::Direct || a.rows() == 0) return std::make_unique<DirectSolver>(a);
  auto h = std::make_unique<AmgHierarchy>(a, amg);
  if (h->indefinite_coarse() && fallback) {
    warnings.push_back(std::string(tag) + ": coarse levels taken from the fallback matrix");
    h = std::make_unique<AmgHierarchy>(a, *fallback, std::move(amg));
  }
  for (const auto& w : h->warnings()) warnings.push_back(std::string(tag) + ": " + w);
  return h;
}

}  // namespace

SchurPreconditioner::SchurPreconditioner(const BlockMatrix5& j, const Vector& d55, const PrecondOptions& opts)
    : layout_(j.layout()) {
  layout_.validate();
  q_ = build_transform(j);
  j_tilde_ = apply_transform(j, q_);
  j11_inv_ = invert_j11(j_tilde_);
  s1_ = build_s1(j_tilde_, j11_inv_);

  const SparseMatrix j23 = j.block_or_zero(2, 3), j33 = j.block_or_zero(3, 3);
  mech_ = stack_blocks({{&s1_.s22, &j23}, {&s1_.s32, &j33}}, {layout_.size(2), layout_.size(3)},
                       {layout_.size(2), layout_.size(3)});
  s3_ = build_s3(j, d55);

  j12_ = j.block_or_zero(1, 2);
  j25_ = j.block_or_zero(2, 5);
  j35_ = j.block_or_zero(3, 5);
  j45_ = j.block_or_zero(4, 5);

  auto mech_functions = opts.mechanics_dof_function;
  if (mech_functions.empty()) mech_functions = default_mechanics_functions(layout_);
  if (static_cast<Index>(mech_functions.size()) != mech_.rows())
    throw DimensionError("mechanics dof function map has wrong length");
  AmgOptions mech_amg = AmgOptions::mechanics(std::move(mech_functions));
  mech_amg.strength_threshold = opts.mechanics_strength;
  AmgOptions flow_amg = AmgOptions::flow();
  flow_amg.strength_threshold = opts.flow_strength;
  flow_amg.truncation = opts.flow_truncation;

  // Friction makes S1 nonsymmetric with an indefinite symmetric part near
  // sliding cells; the elastic block J_{23,23} then carries the coarse levels.
  const SparseMatrix j22 = j.block_or_zero(2, 2), j32 = j.block_or_zero(3, 2);
  const SparseMatrix elastic = stack_blocks({{&j22, &j23}, {&j32, &j33}}, {layout_.size(2), layout_.size(3)},
                                            {layout_.size(2), layout_.size(3)});
  mech_solver_ = make_subsolver(mech_, opts.subsolver, std::move(mech_amg), warnings_, "mechanics", &elastic);
  ilu44_ = std::make_unique<Ilu0>(j.block_or_zero(4, 4));
  flow_solver_ = make_subsolver(s3_, opts.subsolver, std::move(flow_amg), warnings_, "flow");
}

SchurPreconditioner::~SchurPreconditioner() = default;
SchurPreconditioner::SchurPreconditioner(SchurPreconditioner&&) noexcept = default;
SchurPreconditioner& SchurPreconditioner::operator=(SchurPreconditioner&&) noexcept = default;

Vector SchurPreconditioner::apply(const Vector& w) const {
  if (w.size() != layout_.total()) throw DimensionError("SchurPreconditioner::apply: length mismatch");
  const auto seg = [&](const Vector& v, int g) { return v.segment(layout_.offset(g), layout_.size(g)); };
  Vector v = Vector::Zero(w.size());

  Vector v5, v4, v23, v1;
  try {
    v5 = flow_solver_->solve(seg(w, 5));
  } catch (const std::exception& e) {
    throw NumericalError(stage_message("flow", e));
  }
  try {
    Vector r4 = seg(w, 4);
    spmv_add(j45_, v5, -1.0, r4);
    v4 = ilu44_->solve(r4);
  } catch (const std::exception& e) {
    throw NumericalError(stage_message("interface flux", e));
  }
  try {
    Vector r23(layout_.size(2) + layout_.size(3));
    Vector r2 = seg(w, 2), r3 = seg(w, 3);
    spmv_add(j25_, v5, -1.0, r2);
    spmv_add(j35_, v5, -1.0, r3);
    r23 << r2, r3;
    v23 = mech_solver_->solve(r23);
  } catch (const std::exception& e) {
    throw NumericalError(stage_message("mechanics", e));
  }
  Vector r1 = seg(w, 1);
  spmv_add(j12_, v23.head(layout_.size(2)), -1.0, r1);
  v1 = j11_inv_.apply(r1);

  v.segment(layout_.offset(1), layout_.size(1)) = v1;
  v.segment(layout_.offset(2), layout_.size(2) + layout_.size(3)) = v23;
  v.segment(layout_.offset(4), layout_.size(4)) = v4;
  v.segment(layout_.offset(5), layout_.size(5)) = v5;
  if (!v.allFinite()) throw NumericalError("preconditioner produced non-finite values");
  return v;
}

Vector SchurPreconditioner::apply_untransformed(const Vector& w) const { return recover_solution(q_, apply(w)); }

SparseMatrix SchurPreconditioner::as_matrix() const {
  BlockMatrix5 p(layout_);
  // J~11 as realized: its D x D diagonal blocks.
  std::vector<Triplet<double>> t;
  const Index d = layout_.spatial_dim;
  for (Index c = 0; c < j11_inv_.num_blocks(); ++c) {
    const DenseMatrix blk = j11_inv_.block(c).inverse();
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) t.push_back({c * d + a, c * d + b, blk(a, b)});
  }
  p.set(1, 1, SparseMatrix::from_triplets(layout_.size(1), layout_.size(1), std::move(t)));
  p.set(1, 2, j12_);
  p.set(2, 2, s1_.s22);
  p.set(2, 3, j_tilde_.block_or_zero(2, 3));
  p.set(2, 5, j25_);
  p.set(3, 2, s1_.s32);
  p.set(3, 3, j_tilde_.block_or_zero(3, 3));
  p.set(3, 5, j35_);
  p.set(4, 4, multiply(ilu44_->lower(), ilu44_->upper()));
  p.set(4, 5, j45_);
  p.set(5, 5, s3_);
  return assemble_monolithic(p);
}

// ---------------------------------------------------------------- P-hat

SequentialPreconditioner::SequentialPreconditioner(const BlockMatrix5& j, const Vector& d55) : layout_(j.layout()) {
  if (d55.size() != layout_.size(5)) throw DimensionError("SequentialPreconditioner: D55 length mismatch");
  mech_ = group_range_block(j, 1, 3, 1, 3);
  const SparseMatrix s55 = add(j.block_or_zero(5, 5), diagonal_matrix(d55));
  const SparseMatrix j44 = j.block_or_zero(4, 4), j45 = j.block_or_zero(4, 5), j54 = j.block_or_zero(5, 4);
  flow_ = stack_blocks({{&j44, &j45}, {&j54, &s55}}, {layout_.size(4), layout_.size(5)},
                       {layout_.size(4), layout_.size(5)});
  coupling_ = group_range_block(j, 1, 3, 4, 5);
  try {
    mech_solver_ = std::make_unique<DirectSolver>(mech_);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string("sequential scheme: mechanics and contact block singular: ") + e.what());
  }
  flow_solver_ = std::make_unique<DirectSolver>(flow_);
}

Vector SequentialPreconditioner::apply(const Vector& w) const {
  if (w.size() != layout_.total()) throw DimensionError("SequentialPreconditioner::apply: length mismatch");
  const Index nm = mech_.rows();
  const Vector y_flow = flow_solver_->solve(w.tail(w.size() - nm));
  Vector r_mech = w.head(nm);
  spmv_add(coupling_, y_flow, -1.0, r_mech);
  Vector v(w.size());
  v << mech_solver_->solve(r_mech), y_flow;
  return v;
}

SparseMatrix SequentialPreconditioner::as_matrix() const {
  const Index nm = mech_.rows(), nf = flow_.rows();
  return stack_blocks({{&mech_, &coupling_}, {nullptr, &flow_}}, {nm, nf}, {nm, nf});
}

}  // namespace fcpm
