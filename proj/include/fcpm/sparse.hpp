#pragma once

// Compressed-sparse-row kernels shared by every solver component.
//
// CsrMatrix is an immutable value type: column indices are strictly
// increasing within each row and explicit zeros are kept as stored entries.
// All kernels are free functions templated on the scalar type.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcpm/errors.hpp"

namespace fcpm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

template <typename Scalar>
struct Triplet {
  Index row;
  Index col;
  Scalar value;
};

template <typename Scalar>
class CsrMatrix {
 public:
  using scalar_type = Scalar;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using DenseType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  CsrMatrix() : row_offsets_(1, 0) {}

  /// Empty (all-zero) matrix of the given shape.
  CsrMatrix(Index n_rows, Index n_cols)
      : n_rows_(n_rows), n_cols_(n_cols), row_offsets_(static_cast<std::size_t>(n_rows) + 1, 0) {
    if (n_rows < 0 || n_cols < 0) throw DimensionError("CsrMatrix: negative shape");
  }

  CsrMatrix(Index n_rows, Index n_cols, std::vector<Index> row_offsets, std::vector<Index> col_indices,
            std::vector<Scalar> values)
      : n_rows_(n_rows),
        n_cols_(n_cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  static CsrMatrix identity(Index n, Scalar diag = Scalar(1)) {
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
    std::iota(offsets.begin(), offsets.end(), Index{0});
    std::vector<Index> cols(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), Index{0});
    return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::vector<Scalar>(static_cast<std::size_t>(n), diag));
  }

  /// Duplicate (row, col) pairs are summed; entries are kept even when the sum is zero.
  static CsrMatrix from_triplets(Index n_rows, Index n_cols, std::vector<Triplet<Scalar>> triplets) {
    for (const auto& t : triplets) {
      if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
        throw DimensionError("CsrMatrix::from_triplets: entry (" + std::to_string(t.row) + "," +
                             std::to_string(t.col) + ") out of range");
    }
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
    std::vector<Index> cols;
    std::vector<Scalar> vals;
    cols.reserve(triplets.size());
    vals.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
      const Index r = triplets[k].row;
      const Index c = triplets[k].col;
      Scalar sum = 0;
      while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) sum += triplets[k++].value;
      cols.push_back(c);
      vals.push_back(sum);
      ++offsets[static_cast<std::size_t>(r) + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return CsrMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
  }

  /// Stores every nonzero of a dense matrix (exact zeros are skipped).
  static CsrMatrix from_dense(const DenseType& dense) {
    std::vector<Index> offsets(static_cast<std::size_t>(dense.rows()) + 1, 0);
    std::vector<Index> cols;
    std::vector<Scalar> vals;
    for (Index i = 0; i < dense.rows(); ++i) {
      for (Index j = 0; j < dense.cols(); ++j) {
        if (dense(i, j) != Scalar(0)) {
          cols.push_back(j);
          vals.push_back(dense(i, j));
        }
      }
      offsets[static_cast<std::size_t>(i) + 1] = static_cast<Index>(cols.size());
    }
    return CsrMatrix(dense.rows(), dense.cols(), std::move(offsets), std::move(cols), std::move(vals));
  }

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  Index nnz() const { return static_cast<Index>(col_indices_.size()); }

  std::span<const Index> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return col_indices_; }
  std::span<const Scalar> values() const { return values_; }

  Index row_begin(Index i) const { return row_offsets_[static_cast<std::size_t>(i)]; }
  Index row_end(Index i) const { return row_offsets_[static_cast<std::size_t>(i) + 1]; }
  Index col(Index k) const { return col_indices_[static_cast<std::size_t>(k)]; }
  Scalar value(Index k) const { return values_[static_cast<std::size_t>(k)]; }

  /// Entry (i, j); zero when not stored.
  Scalar coeff(Index i, Index j) const {
    const auto first = col_indices_.begin() + row_begin(i);
    const auto last = col_indices_.begin() + row_end(i);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return Scalar(0);
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }

  /// Position of (i, j) in the value array, or -1 when not stored.
  Index find(Index i, Index j) const {
    const auto first = col_indices_.begin() + row_begin(i);
    const auto last = col_indices_.begin() + row_end(i);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return -1;
    return static_cast<Index>(it - col_indices_.begin());
  }

  DenseType to_dense() const {
    DenseType d = DenseType::Zero(n_rows_, n_cols_);
    for (Index i = 0; i < n_rows_; ++i)
      for (Index k = row_begin(i); k < row_end(i); ++k) d(i, col(k)) += value(k);
    return d;
  }

  CsrMatrix transpose() const {
    std::vector<Index> offsets(static_cast<std::size_t>(n_cols_) + 1, 0);
    for (Index c : col_indices_) ++offsets[static_cast<std::size_t>(c) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
    std::vector<Index> cols(col_indices_.size());
    std::vector<Scalar> vals(values_.size());
    for (Index i = 0; i < n_rows_; ++i) {
      for (Index k = row_begin(i); k < row_end(i); ++k) {
        const auto dst = static_cast<std::size_t>(cursor[static_cast<std::size_t>(col(k))]++);
        cols[dst] = i;
        vals[dst] = value(k);
      }
    }
    return CsrMatrix(n_cols_, n_rows_, std::move(offsets), std::move(cols), std::move(vals));
  }

  /// Same structure with every value multiplied by `factor`.
  CsrMatrix scaled(Scalar factor) const {
    std::vector<Scalar> vals(values_);
    for (auto& v : vals) v *= factor;
    return CsrMatrix(n_rows_, n_cols_, row_offsets_, col_indices_, std::move(vals));
  }

  /// Largest absolute stored value.
  Scalar max_abs() const {
    Scalar m = 0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const CsrMatrix& a, const CsrMatrix& b) {
    return a.n_rows_ == b.n_rows_ && a.n_cols_ == b.n_cols_ && a.row_offsets_ == b.row_offsets_ &&
           a.col_indices_ == b.col_indices_ && a.values_ == b.values_;
  }

 private:
  void validate() const {
    if (n_rows_ < 0 || n_cols_ < 0) throw DimensionError("CsrMatrix: negative shape");
    if (row_offsets_.size() != static_cast<std::size_t>(n_rows_) + 1)
      throw DimensionError("CsrMatrix: row_offsets must have n_rows+1 entries");
    if (row_offsets_.front() != 0 || static_cast<std::size_t>(row_offsets_.back()) != col_indices_.size())
      throw DimensionError("CsrMatrix: row_offsets inconsistent with col_indices");
    if (values_.size() != col_indices_.size())
      throw DimensionError("CsrMatrix: values and col_indices differ in length");
    for (Index i = 0; i < n_rows_; ++i) {
      if (row_end(i) < row_begin(i)) throw DimensionError("CsrMatrix: row_offsets decreasing");
      for (Index k = row_begin(i); k < row_end(i); ++k) {
        if (col(k) < 0 || col(k) >= n_cols_)
          throw DimensionError("CsrMatrix: column index out of range in row " + std::to_string(i));
        if (k > row_begin(i) && col(k) <= col(k - 1))
          throw DimensionError("CsrMatrix: column indices not strictly increasing in row " + std::to_string(i));
      }
    }
  }

  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<Scalar> values_;
};

using SparseMatrix = CsrMatrix<double>;

/// y = A x, summing each row left to right.
template <typename Scalar, typename Derived>
typename CsrMatrix<Scalar>::VectorType spmv(const CsrMatrix<Scalar>& a, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != a.cols())
    throw DimensionError("spmv: vector length " + std::to_string(x.size()) + " != n_cols " +
                         std::to_string(a.cols()));
  typename CsrMatrix<Scalar>::VectorType y(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    Scalar s = 0;
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) s += a.value(k) * x(a.col(k));
    y(i) = s;
  }
  return y;
}

/// y += alpha * A x
template <typename Scalar, typename DerivedX, typename DerivedY>
void spmv_add(const CsrMatrix<Scalar>& a, const Eigen::MatrixBase<DerivedX>& x, Scalar alpha,
              Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != a.cols() || y.size() != a.rows()) throw DimensionError("spmv_add: shape mismatch");
  for (Index i = 0; i < a.rows(); ++i) {
    Scalar s = 0;
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) s += a.value(k) * x(a.col(k));
    y(i) += alpha * s;
  }
}

/// Structural product A*B (Gustavson). Entries that cancel to zero stay stored.
template <typename Scalar>
CsrMatrix<Scalar> multiply(const CsrMatrix<Scalar>& a, const CsrMatrix<Scalar>& b) {
  if (a.cols() != b.rows())
    throw DimensionError("multiply: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  std::vector<Index> offsets(static_cast<std::size_t>(a.rows()) + 1, 0);
  std::vector<Index> cols;
  std::vector<Scalar> vals;
  std::vector<Index> marker(static_cast<std::size_t>(b.cols()), -1);
  std::vector<Scalar> accum(static_cast<std::size_t>(b.cols()), Scalar(0));
  std::vector<Index> row_cols;
  for (Index i = 0; i < a.rows(); ++i) {
    row_cols.clear();
    for (Index ka = a.row_begin(i); ka < a.row_end(i); ++ka) {
      const Index k = a.col(ka);
      const Scalar av = a.value(ka);
      for (Index kb = b.row_begin(k); kb < b.row_end(k); ++kb) {
        const auto j = static_cast<std::size_t>(b.col(kb));
        if (marker[j] != i) {
          marker[j] = i;
          accum[j] = av * b.value(kb);
          row_cols.push_back(b.col(kb));
        } else {
          accum[j] += av * b.value(kb);
        }
      }
    }
    std::sort(row_cols.begin(), row_cols.end());
    for (Index j : row_cols) {
      cols.push_back(j);
      vals.push_back(accum[static_cast<std::size_t>(j)]);
    }
    offsets[static_cast<std::size_t>(i) + 1] = static_cast<Index>(cols.size());
  }
  return CsrMatrix<Scalar>(a.rows(), b.cols(), std::move(offsets), std::move(cols), std::move(vals));
}

/// alpha*A + beta*B on the union pattern.
template <typename Scalar>
CsrMatrix<Scalar> add(const CsrMatrix<Scalar>& a, const CsrMatrix<Scalar>& b, Scalar alpha = 1, Scalar beta = 1) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("add: shape mismatch");
  std::vector<Index> offsets(static_cast<std::size_t>(a.rows()) + 1, 0);
  std::vector<Index> cols;
  std::vector<Scalar> vals;
  cols.reserve(static_cast<std::size_t>(a.nnz() + b.nnz()));
  vals.reserve(static_cast<std::size_t>(a.nnz() + b.nnz()));
  for (Index i = 0; i < a.rows(); ++i) {
    Index ka = a.row_begin(i), kb = b.row_begin(i);
    while (ka < a.row_end(i) || kb < b.row_end(i)) {
      const Index ca = ka < a.row_end(i) ? a.col(ka) : a.cols();
      const Index cb = kb < b.row_end(i) ? b.col(kb) : b.cols();
      if (ca == cb) {
        cols.push_back(ca);
        vals.push_back(alpha * a.value(ka++) + beta * b.value(kb++));
      } else if (ca < cb) {
        cols.push_back(ca);
        vals.push_back(alpha * a.value(ka++));
      } else {
        cols.push_back(cb);
        vals.push_back(beta * b.value(kb++));
      }
    }
    offsets[static_cast<std::size_t>(i) + 1] = static_cast<Index>(cols.size());
  }
  return CsrMatrix<Scalar>(a.rows(), a.cols(), std::move(offsets), std::move(cols), std::move(vals));
}

/// Result (i, j) equals A(rows[i], cols[j]). Index sets must be sorted and unique.
template <typename Scalar>
CsrMatrix<Scalar> extract_submatrix(const CsrMatrix<Scalar>& a, std::span<const Index> rows,
                                    std::span<const Index> cols) {
  auto check = [](std::span<const Index> set, Index bound, const char* what) {
    for (std::size_t k = 0; k < set.size(); ++k) {
      if (set[k] < 0 || set[k] >= bound)
        throw DimensionError(std::string("extract_submatrix: ") + what + " index " + std::to_string(set[k]) +
                             " out of range");
      if (k > 0 && set[k] <= set[k - 1])
        throw DimensionError(std::string("extract_submatrix: ") + what + " indices must be sorted and unique");
    }
  };
  check(rows, a.rows(), "row");
  check(cols, a.cols(), "column");
  std::vector<Index> col_map(static_cast<std::size_t>(a.cols()), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_map[static_cast<std::size_t>(cols[j])] = static_cast<Index>(j);
  std::vector<Index> offsets(rows.size() + 1, 0);
  std::vector<Index> out_cols;
  std::vector<Scalar> vals;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index k = a.row_begin(rows[i]); k < a.row_end(rows[i]); ++k) {
      const Index mapped = col_map[static_cast<std::size_t>(a.col(k))];
      if (mapped >= 0) {
        out_cols.push_back(mapped);
        vals.push_back(a.value(k));
      }
    }
    offsets[i + 1] = static_cast<Index>(out_cols.size());
  }
  return CsrMatrix<Scalar>(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()), std::move(offsets),
                           std::move(out_cols), std::move(vals));
}

/// Contiguous index range [first, first + count).
inline std::vector<Index> index_range(Index first, Index count) {
  std::vector<Index> r(static_cast<std::size_t>(count));
  std::iota(r.begin(), r.end(), first);
  return r;
}

template <typename Scalar>
typename CsrMatrix<Scalar>::VectorType diagonal(const CsrMatrix<Scalar>& a) {
  const Index n = std::min(a.rows(), a.cols());
  typename CsrMatrix<Scalar>::VectorType d = CsrMatrix<Scalar>::VectorType::Zero(n);
  for (Index i = 0; i < n; ++i) d(i) = a.coeff(i, i);
  return d;
}

/// Diagonal matrix with the given entries, every diagonal position stored.
template <typename Derived>
CsrMatrix<typename Derived::Scalar> diagonal_matrix(const Eigen::MatrixBase<Derived>& d) {
  using Scalar = typename Derived::Scalar;
  const Index n = d.size();
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
  std::iota(offsets.begin(), offsets.end(), Index{0});
  std::vector<Index> cols(static_cast<std::size_t>(n));
  std::iota(cols.begin(), cols.end(), Index{0});
  std::vector<Scalar> vals(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = d(i);
  return CsrMatrix<Scalar>(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

/// Scales row i by s(i).
template <typename Scalar, typename Derived>
CsrMatrix<Scalar> scale_rows(const CsrMatrix<Scalar>& a, const Eigen::MatrixBase<Derived>& s) {
  if (s.size() != a.rows()) throw DimensionError("scale_rows: length mismatch");
  std::vector<Scalar> vals(a.values().begin(), a.values().end());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) vals[static_cast<std::size_t>(k)] *= s(i);
  const auto off = a.row_offsets();
  const auto cols = a.col_indices();
  return CsrMatrix<Scalar>(a.rows(), a.cols(), {off.begin(), off.end()}, {cols.begin(), cols.end()}, std::move(vals));
}

/// Inverses of the D x D diagonal blocks of a square matrix, one per cell.
template <typename Scalar>
class BlockDiagInverse {
 public:
  using Block = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BlockDiagInverse() = default;
  BlockDiagInverse(Index block_size, std::vector<Block> inv_blocks)
      : block_size_(block_size), inv_blocks_(std::move(inv_blocks)) {}

  Index block_size() const { return block_size_; }
  Index num_blocks() const { return static_cast<Index>(inv_blocks_.size()); }
  Index size() const { return block_size_ * num_blocks(); }
  const Block& block(Index cell) const { return inv_blocks_[static_cast<std::size_t>(cell)]; }
  const std::vector<Block>& blocks() const { return inv_blocks_; }

  template <typename Derived>
  VectorType apply(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != size()) throw DimensionError("BlockDiagInverse::apply: length mismatch");
    VectorType y(x.size());
    for (Index c = 0; c < num_blocks(); ++c)
      y.segment(c * block_size_, block_size_).noalias() = block(c) * x.segment(c * block_size_, block_size_);
    return y;
  }

  /// The inverse as a sparse block-diagonal matrix (all block entries stored).
  CsrMatrix<Scalar> to_sparse() const {
    std::vector<Triplet<Scalar>> t;
    t.reserve(static_cast<std::size_t>(num_blocks() * block_size_ * block_size_));
    for (Index c = 0; c < num_blocks(); ++c)
      for (Index i = 0; i < block_size_; ++i)
        for (Index j = 0; j < block_size_; ++j)
          t.push_back({c * block_size_ + i, c * block_size_ + j, block(c)(i, j)});
    return CsrMatrix<Scalar>::from_triplets(size(), size(), std::move(t));
  }

 private:
  Index block_size_ = 1;
  std::vector<Block> inv_blocks_;
};

/// Extracts the D x D diagonal blocks of `a` (off-block entries ignored).
template <typename Scalar>
std::vector<typename BlockDiagInverse<Scalar>::Block> diagonal_blocks(const CsrMatrix<Scalar>& a, Index block_size) {
  if (a.rows() != a.cols()) throw DimensionError("diagonal_blocks: matrix not square");
  if (block_size <= 0 || a.rows() % block_size != 0)
    throw DimensionError("diagonal_blocks: size " + std::to_string(a.rows()) + " not divisible by block size " +
                         std::to_string(block_size));
  const Index n_blocks = a.rows() / block_size;
  std::vector<typename BlockDiagInverse<Scalar>::Block> blocks(
      static_cast<std::size_t>(n_blocks), BlockDiagInverse<Scalar>::Block::Zero(block_size, block_size));
  for (Index i = 0; i < a.rows(); ++i) {
    const Index cell = i / block_size;
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
      const Index j = a.col(k);
      if (j / block_size == cell) blocks[static_cast<std::size_t>(cell)](i % block_size, j % block_size) += a.value(k);
    }
  }
  return blocks;
}

/// Exact dense inverse of every D x D diagonal block. A block is rejected as
/// singular when |det| < 1e-14 * ||block||_F^D.
template <typename Scalar>
BlockDiagInverse<Scalar> block_diag_inverse(const CsrMatrix<Scalar>& a, Index block_size) {
  auto blocks = diagonal_blocks(a, block_size);
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    auto& b = blocks[c];
    const Scalar scale = std::pow(b.norm(), static_cast<Scalar>(block_size));
    const Scalar det = b.determinant();
    if (!(std::abs(det) >= Scalar(1e-14) * scale) || scale == Scalar(0))
      throw SingularMatrixError("singular diagonal block at cell " + std::to_string(c));
    b = b.inverse().eval();
  }
  return BlockDiagInverse<Scalar>(block_size, std::move(blocks));
}

}  // namespace fcpm
