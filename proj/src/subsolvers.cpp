#include "fcpm/subsolvers.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <set>

namespace fcpm {

// ---------------------------------------------------------------- direct

struct DirectSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

DirectSolver::DirectSolver(const SparseMatrix& a) : impl_(std::make_unique<Impl>()), n_(a.rows()) {
  if (a.rows() != a.cols()) throw DimensionError("DirectSolver: matrix not square");
  if (n_ == 0) return;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nnz()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k)
      t.emplace_back(static_cast<int>(i), static_cast<int>(a.col(k)), a.value(k));
  Eigen::SparseMatrix<double> m(static_cast<int>(n_), static_cast<int>(n_));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  impl_->lu.analyzePattern(m);
  impl_->lu.factorize(m);
  if (impl_->lu.info() != Eigen::Success)
    throw SingularMatrixError("direct factorization failed: " + impl_->lu.lastErrorMessage());
}

DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;

Vector DirectSolver::solve(const Vector& b) const {
  if (b.size() != n_) throw DimensionError("DirectSolver::solve: rhs length mismatch");
  if (n_ == 0) return Vector(0);
  Vector x = impl_->lu.solve(b);
  return x;
}

// ---------------------------------------------------------------- ILU(0)

Ilu0::Ilu0(const SparseMatrix& a) : lu_(a), diag_pos_(static_cast<std::size_t>(a.rows()), -1) {
  if (a.rows() != a.cols()) throw DimensionError("Ilu0: matrix not square");
  const Index n = a.rows();
  for (Index i = 0; i < n; ++i) {
    diag_pos_[static_cast<std::size_t>(i)] = a.find(i, i);
    if (diag_pos_[static_cast<std::size_t>(i)] < 0 || a.value(diag_pos_[static_cast<std::size_t>(i)]) == 0.0)
      throw SingularMatrixError("Ilu0: zero diagonal entry in row " + std::to_string(i));
  }
  std::vector<double> v(a.values().begin(), a.values().end());
  std::vector<Index> where(static_cast<std::size_t>(n), -1);
  // IKJ variant: row i is eliminated against the already factored rows k < i.
  for (Index i = 0; i < n; ++i) {
    for (Index p = a.row_begin(i); p < a.row_end(i); ++p) where[static_cast<std::size_t>(a.col(p))] = p;
    for (Index p = a.row_begin(i); p < a.row_end(i) && a.col(p) < i; ++p) {
      const Index k = a.col(p);
      const double pivot = v[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(k)])];
      const double lik = v[static_cast<std::size_t>(p)] / pivot;
      v[static_cast<std::size_t>(p)] = lik;
      for (Index q = diag_pos_[static_cast<std::size_t>(k)] + 1; q < a.row_end(k); ++q) {
        const Index w = where[static_cast<std::size_t>(a.col(q))];
        if (w >= 0) v[static_cast<std::size_t>(w)] -= lik * v[static_cast<std::size_t>(q)];
      }
    }
    for (Index p = a.row_begin(i); p < a.row_end(i); ++p) where[static_cast<std::size_t>(a.col(p))] = -1;
    const double d = v[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(i)])];
    if (d == 0.0 || !std::isfinite(d)) throw SingularMatrixError("Ilu0: zero pivot in row " + std::to_string(i));
  }
  const auto off = a.row_offsets();
  const auto cols = a.col_indices();
  lu_ = SparseMatrix(n, n, {off.begin(), off.end()}, {cols.begin(), cols.end()}, std::move(v));
}

Vector Ilu0::solve(const Vector& b) const {
  const Index n = lu_.rows();
  if (b.size() != n) throw DimensionError("Ilu0::solve: rhs length mismatch");
  Vector x = b;
  for (Index i = 0; i < n; ++i) {
    double s = x(i);
    for (Index p = lu_.row_begin(i); p < diag_pos_[static_cast<std::size_t>(i)]; ++p) s -= lu_.value(p) * x(lu_.col(p));
    x(i) = s;
  }
  for (Index i = n - 1; i >= 0; --i) {
    double s = x(i);
    const Index d = diag_pos_[static_cast<std::size_t>(i)];
    for (Index p = d + 1; p < lu_.row_end(i); ++p) s -= lu_.value(p) * x(lu_.col(p));
    x(i) = s / lu_.value(d);
  }
  return x;
}

SparseMatrix Ilu0::lower() const {
  std::vector<Triplet<double>> t;
  for (Index i = 0; i < lu_.rows(); ++i) {
    for (Index p = lu_.row_begin(i); p < lu_.row_end(i); ++p)
      if (lu_.col(p) < i) t.push_back({i, lu_.col(p), lu_.value(p)});
    t.push_back({i, i, 1.0});
  }
  return SparseMatrix::from_triplets(lu_.rows(), lu_.cols(), std::move(t));
}

SparseMatrix Ilu0::upper() const {
  std::vector<Triplet<double>> t;
  for (Index i = 0; i < lu_.rows(); ++i)
    for (Index p = lu_.row_begin(i); p < lu_.row_end(i); ++p)
      if (lu_.col(p) >= i) t.push_back({i, lu_.col(p), lu_.value(p)});
  return SparseMatrix::from_triplets(lu_.rows(), lu_.cols(), std::move(t));
}

// ---------------------------------------------------------------- AMG kernels

AmgOptions AmgOptions::mechanics(std::vector<int> dof_function) {
  AmgOptions o;
  o.strength_threshold = 0.7;
  o.dof_function = std::move(dof_function);
  return o;
}

AmgOptions AmgOptions::flow() {
  AmgOptions o;
  o.strength_threshold = 0.25;
  o.truncation = 0.3;
  return o;
}

namespace {

int function_of(const std::vector<int>& f, Index i) { return f.empty() ? 0 : f[static_cast<std::size_t>(i)]; }

}  // namespace

SparseMatrix strength_matrix(const SparseMatrix& a, double theta, const std::vector<int>& dof_function) {
  const Index n = a.rows();
  if (!dof_function.empty() && static_cast<Index>(dof_function.size()) != n)
    throw DimensionError("strength_matrix: dof_function length mismatch");
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> cols;
  for (Index i = 0; i < n; ++i) {
    const int fi = function_of(dof_function, i);
    double max_neg = 0.0;
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
      const Index j = a.col(k);
      if (j != i && function_of(dof_function, j) == fi) max_neg = std::max(max_neg, -a.value(k));
    }
    if (max_neg > 0.0) {
      for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
        const Index j = a.col(k);
        if (j != i && function_of(dof_function, j) == fi && -a.value(k) >= theta * max_neg) cols.push_back(j);
      }
    }
    offsets[static_cast<std::size_t>(i) + 1] = static_cast<Index>(cols.size());
  }
  std::vector<double> ones(cols.size(), 1.0);
  return SparseMatrix(n, a.cols(), std::move(offsets), std::move(cols), std::move(ones));
}

std::vector<bool> rs_coarsen(const SparseMatrix& s) {
  const Index n = s.rows();
  const SparseMatrix st = s.transpose();  // row i of st: points that strongly depend on i
  enum : char { kUndecided, kCoarse, kFine };
  std::vector<char> mark(static_cast<std::size_t>(n), kUndecided);
  std::vector<Index> measure(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) measure[static_cast<std::size_t>(i)] = st.row_end(i) - st.row_begin(i);

  // Points with no strong connection in either direction cannot be interpolated: make them fine.
  for (Index i = 0; i < n; ++i)
    if (measure[static_cast<std::size_t>(i)] == 0 && s.row_end(i) == s.row_begin(i))
      mark[static_cast<std::size_t>(i)] = kFine;

  // Ordered by (-measure, index): largest measure first, lowest index on ties.
  std::set<std::pair<Index, Index>> queue;
  for (Index i = 0; i < n; ++i)
    if (mark[static_cast<std::size_t>(i)] == kUndecided) queue.insert({-measure[static_cast<std::size_t>(i)], i});

  auto bump = [&](Index j, Index delta) {
    auto& mj = measure[static_cast<std::size_t>(j)];
    queue.erase({-mj, j});
    mj += delta;
    queue.insert({-mj, j});
  };

  while (!queue.empty()) {
    const auto [neg_measure, i] = *queue.begin();
    queue.erase(queue.begin());
    if (neg_measure == 0) {
      // Nothing left that influences anyone: remaining points become fine
      // and are repaired below if they lack a coarse interpolation source.
      mark[static_cast<std::size_t>(i)] = kFine;
      continue;
    }
    mark[static_cast<std::size_t>(i)] = kCoarse;
    for (Index p = st.row_begin(i); p < st.row_end(i); ++p) {
      const Index j = st.col(p);
      if (mark[static_cast<std::size_t>(j)] != kUndecided) continue;
      mark[static_cast<std::size_t>(j)] = kFine;
      queue.erase({-measure[static_cast<std::size_t>(j)], j});
      for (Index q = s.row_begin(j); q < s.row_end(j); ++q) {
        const Index k = s.col(q);
        if (mark[static_cast<std::size_t>(k)] == kUndecided) bump(k, 1);
      }
    }
    for (Index q = s.row_begin(i); q < s.row_end(i); ++q) {
      const Index k = s.col(q);
      if (mark[static_cast<std::size_t>(k)] == kUndecided) bump(k, -1);
    }
  }

  // Every fine point with strong dependencies needs a strong coarse neighbour.
  for (Index i = 0; i < n; ++i) {
    if (mark[static_cast<std::size_t>(i)] != kFine || s.row_end(i) == s.row_begin(i)) continue;
    bool has_coarse = false;
    for (Index q = s.row_begin(i); q < s.row_end(i) && !has_coarse; ++q)
      has_coarse = mark[static_cast<std::size_t>(s.col(q))] == kCoarse;
    if (!has_coarse) mark[static_cast<std::size_t>(i)] = kCoarse;
  }

  std::vector<bool> coarse(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) coarse[static_cast<std::size_t>(i)] = mark[static_cast<std::size_t>(i)] == kCoarse;
  return coarse;
}

SparseMatrix direct_interpolation(const SparseMatrix& a, const SparseMatrix& s, const std::vector<bool>& coarse,
                                  const std::vector<int>& dof_function, double truncation) {
  const Index n = a.rows();
  std::vector<Index> coarse_index(static_cast<std::size_t>(n), -1);
  Index nc = 0;
  for (Index i = 0; i < n; ++i)
    if (coarse[static_cast<std::size_t>(i)]) coarse_index[static_cast<std::size_t>(i)] = nc++;

  std::vector<Triplet<double>> t;
  std::vector<std::pair<Index, double>> row;
  for (Index i = 0; i < n; ++i) {
    if (coarse[static_cast<std::size_t>(i)]) {
      t.push_back({i, coarse_index[static_cast<std::size_t>(i)], 1.0});
      continue;
    }
    const int fi = function_of(dof_function, i);
    double diag = 0.0, sum_neg = 0.0, sum_pos = 0.0, sum_neg_p = 0.0, sum_pos_p = 0.0;
    Index q = s.row_begin(i);
    row.clear();
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
      const Index j = a.col(k);
      const double v = a.value(k);
      if (j == i) {
        diag += v;
        continue;
      }
      if (function_of(dof_function, j) != fi) continue;
      while (q < s.row_end(i) && s.col(q) < j) ++q;
      const bool strong = q < s.row_end(i) && s.col(q) == j;
      (v < 0 ? sum_neg : sum_pos) += v;
      if (strong && coarse[static_cast<std::size_t>(j)]) {
        (v < 0 ? sum_neg_p : sum_pos_p) += v;
        row.push_back({j, v});
      }
    }
    if (row.empty()) continue;  // no interpolation source: coarse correction is zero here
    if (sum_pos_p == 0.0) diag += sum_pos;
    if (diag == 0.0) throw SingularMatrixError("AMG interpolation: zero diagonal in row " + std::to_string(i));
    const double alpha = sum_neg_p != 0.0 ? sum_neg / sum_neg_p : 0.0;
    const double beta = sum_pos_p != 0.0 ? sum_pos / sum_pos_p : 0.0;
    double max_w = 0.0, row_sum = 0.0;
    for (auto& [j, v] : row) {
      v = -(v < 0 ? alpha : beta) * v / diag;
      max_w = std::max(max_w, std::abs(v));
      row_sum += v;
    }
    if (truncation > 0.0) {
      double kept = 0.0;
      for (const auto& [j, w] : row)
        if (std::abs(w) >= truncation * max_w) kept += w;
      const double rescale = kept != 0.0 ? row_sum / kept : 1.0;
      for (const auto& [j, w] : row)
        if (std::abs(w) >= truncation * max_w) t.push_back({i, coarse_index[static_cast<std::size_t>(j)], w * rescale});
    } else {
      for (const auto& [j, w] : row) t.push_back({i, coarse_index[static_cast<std::size_t>(j)], w});
    }
  }
  return SparseMatrix::from_triplets(n, nc, std::move(t));
}

void symmetric_gauss_seidel(const SparseMatrix& a, const Vector& b, Vector& x) {
  const Index n = a.rows();
  auto relax = [&](Index i) {
    double s = b(i), d = 0.0;
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
      const Index j = a.col(k);
      if (j == i)
        d = a.value(k);
      else
        s -= a.value(k) * x(j);
    }
    if (d == 0.0) throw SingularMatrixError("Gauss-Seidel: zero diagonal in row " + std::to_string(i));
    x(i) = s / d;
  };
  for (Index i = 0; i < n; ++i) relax(i);
  for (Index i = n - 1; i >= 0; --i) relax(i);
}

// ---------------------------------------------------------------- AMG hierarchy

namespace {

bool positive_diagonal(const SparseMatrix& a) {
  for (Index i = 0; i < a.rows(); ++i)
    if (!(a.coeff(i, i) > 0.0)) return false;
  return true;
}

}  // namespace

AmgHierarchy::AmgHierarchy(const SparseMatrix& a, AmgOptions opts) : opts_(std::move(opts)) {
  build(a);
  coarse_ = std::make_unique<DirectSolver>(levels_.back().a);
}

AmgHierarchy::AmgHierarchy(const SparseMatrix& a, const SparseMatrix& setup, AmgOptions opts)
    : opts_(std::move(opts)) {
  if (a.rows() != setup.rows() || a.cols() != setup.cols())
    throw DimensionError("AmgHierarchy: setup matrix has a different shape");
  build(setup);
  levels_.front().a = a;
  coarse_ = std::make_unique<DirectSolver>(levels_.back().a);
}

void AmgHierarchy::build(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("AmgHierarchy: matrix not square");
  if (!opts_.dof_function.empty() && static_cast<Index>(opts_.dof_function.size()) != a.rows())
    throw DimensionError("AmgHierarchy: dof_function length mismatch");
  levels_.push_back({a, {}, {}, opts_.dof_function});
  while (true) {
    AmgLevel& fine = levels_.back();
    const Index n = fine.a.rows();
    if (n <= opts_.coarsest_size || static_cast<Index>(levels_.size()) >= opts_.max_levels) break;
    const SparseMatrix strength = strength_matrix(fine.a, opts_.strength_threshold, fine.dof_function);
    const auto coarse = rs_coarsen(strength);
    const auto nc = static_cast<Index>(std::count(coarse.begin(), coarse.end(), true));
    if (nc == 0) {
      warnings_.push_back("level " + std::to_string(levels_.size() - 1) +
                          ": no coarse points selected, using a direct solve");
      break;
    }
    if (nc >= n) {
      warnings_.push_back("level " + std::to_string(levels_.size() - 1) +
                          ": coarsening stagnated, using a direct solve");
      break;
    }
    fine.p = direct_interpolation(fine.a, strength, coarse, fine.dof_function, opts_.truncation);
    fine.r = fine.p.transpose();
    std::vector<int> coarse_function;
    if (!fine.dof_function.empty())
      for (Index i = 0; i < n; ++i)
        if (coarse[static_cast<std::size_t>(i)]) coarse_function.push_back(fine.dof_function[static_cast<std::size_t>(i)]);
    SparseMatrix ac = multiply(fine.r, multiply(fine.a, fine.p));
    // With a nonsymmetric fine matrix the Galerkin product can lose its
    // positive diagonal, and Gauss-Seidel on such a level amplifies instead of
    // smoothing. Stop there and solve the current level directly.
    if (positive_diagonal(fine.a) && !positive_diagonal(ac)) {
      warnings_.push_back("level " + std::to_string(levels_.size()) +
                          ": Galerkin operator has a nonpositive diagonal, using a direct solve one level up");
      fine.p = SparseMatrix();
      fine.r = SparseMatrix();
      indefinite_coarse_ = true;
      break;
    }
    levels_.push_back({std::move(ac), {}, {}, std::move(coarse_function)});
  }
}

AmgHierarchy::~AmgHierarchy() = default;
AmgHierarchy::AmgHierarchy(AmgHierarchy&&) noexcept = default;
AmgHierarchy& AmgHierarchy::operator=(AmgHierarchy&&) noexcept = default;

void AmgHierarchy::cycle(std::size_t l, const Vector& b, Vector& x) const {
  if (l + 1 == levels_.size()) {
    x = coarse_->solve(b);
    return;
  }
  const AmgLevel& lev = levels_[l];
  symmetric_gauss_seidel(lev.a, b, x);
  Vector r = b - spmv(lev.a, x);
  const Vector rc = spmv(lev.r, r);
  Vector ec = Vector::Zero(rc.size());
  cycle(l + 1, rc, ec);
  x += spmv(lev.p, ec);
  symmetric_gauss_seidel(lev.a, b, x);
}

Vector AmgHierarchy::vcycle(const Vector& b, const Vector& x0) const {
  if (b.size() != size() || x0.size() != size()) throw DimensionError("AmgHierarchy::vcycle: length mismatch");
  Vector x = x0;
  cycle(0, b, x);
  return x;
}

Vector AmgHierarchy::solve(const Vector& b) const { return vcycle(b, Vector::Zero(b.size())); }

}  // namespace fcpm
