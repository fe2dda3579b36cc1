#pragma once

// 5x5 block view of the fracture contact poromechanics Jacobian.
//
// Groups are numbered 1..5 throughout the public API:
//   1 contact traction, 2 interface force balance (interface displacements),
//   3 momentum balance (matrix displacements), 4 interface flux,
//   5 mass balance (matrix pressures, then fracture pressures, then intersections).

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "fcpm/sparse.hpp"

namespace fcpm {

inline constexpr int kNumGroups = 5;

struct BlockLayout {
  std::array<Index, kNumGroups> group_sizes{};
  Index spatial_dim = 2;
  /// Number of contact units (fracture cells or contact nodes); group 1 holds
  /// one D-vector per unit and group 2 one D-vector per unit and side.
  Index fracture_cells = 0;

  Index size(int group) const { return group_sizes[static_cast<std::size_t>(group - 1)]; }
  Index offset(int group) const;
  Index total() const;
  /// Global indices of a group, sorted.
  std::vector<Index> indices(int group) const;
  /// Global indices of several groups, sorted.
  std::vector<Index> indices(std::initializer_list<int> groups) const;

  /// Throws DimensionError on negative sizes or inconsistent contact counts.
  void validate() const;

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;
};

class BlockMatrix5 {
 public:
  BlockMatrix5() = default;
  explicit BlockMatrix5(BlockLayout layout);

  const BlockLayout& layout() const { return layout_; }

  bool has(int i, int j) const { return slot(i, j).has_value(); }
  /// Present block or throws std::out_of_range.
  const SparseMatrix& block(int i, int j) const;
  /// Present block or an all-zero matrix of the right shape.
  SparseMatrix block_or_zero(int i, int j) const;
  const std::optional<SparseMatrix>& get(int i, int j) const { return slot(i, j); }

  /// Shape-checked insertion; throws DimensionError naming the block.
  void set(int i, int j, SparseMatrix m);
  void clear(int i, int j) { slot(i, j).reset(); }

 private:
  std::optional<SparseMatrix>& slot(int i, int j);
  const std::optional<SparseMatrix>& slot(int i, int j) const;

  BlockLayout layout_;
  std::array<std::optional<SparseMatrix>, kNumGroups * kNumGroups> blocks_;
};

SparseMatrix assemble_monolithic(const BlockMatrix5& m);

/// Blocks without any stored entry are left absent.
BlockMatrix5 split_blocks(const SparseMatrix& a, const BlockLayout& layout);

/// True when block (i, j) may carry nonzeros in the original Jacobian.
bool block_allowed(int i, int j);

/// Rejects any block holding a nonzero value where the Jacobian structure has none.
void validate_pattern(const BlockMatrix5& m);

struct LinearSystem {
  BlockMatrix5 matrix;
  Vector rhs;
};

/// Writes `<base>.mtx`, `<base>.blocks.json` and `<base>.rhs.txt`.
void write_system(const BlockMatrix5& m, const Vector& rhs, const std::filesystem::path& base);

/// Reads the three files written by write_system. An optional "permutation"
/// array in the metadata maps group-ordered index k to file index perm[k].
LinearSystem read_system(const std::filesystem::path& base);

void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& file);
SparseMatrix read_matrix_market(const std::filesystem::path& file);

}  // namespace fcpm
