#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fcpm/block_system.hpp"
#include "test_util.hpp"

using namespace fcpm;

namespace {

BlockLayout layout_for(Index nf, Index n3, Index n4, Index n5, Index dim = 2) {
  BlockLayout l;
  l.spatial_dim = dim;
  l.fracture_cells = nf;
  l.group_sizes = {nf * dim, 2 * nf * dim, n3, n4, n5};
  return l;
}

// Random fill of every block the Jacobian structure allows.
BlockMatrix5 random_system(const BlockLayout& layout, std::mt19937& rng, double density = 0.3) {
  BlockMatrix5 m(layout);
  for (int i = 1; i <= 5; ++i)
    for (int j = 1; j <= 5; ++j) {
      if (!block_allowed(i, j) || layout.size(i) == 0 || layout.size(j) == 0) continue;
      auto b = test::random_sparse(layout.size(i), layout.size(j), density, rng, i == j);
      if (b.nnz() > 0) m.set(i, j, std::move(b));
    }
  return m;
}

std::filesystem::path scratch_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / ("fcpm_test_" + std::string(name));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("assemble_monolithic trivial cases") {
  const BlockLayout l = layout_for(0, 2, 0, 3);
  const SparseMatrix empty = assemble_monolithic(BlockMatrix5(l));
  CHECK(empty.rows() == 5);
  CHECK(empty.nnz() == 0);

  BlockLayout unit;
  unit.spatial_dim = 1;
  unit.fracture_cells = 1;
  unit.group_sizes = {1, 2, 1, 1, 1};
  BlockMatrix5 m(unit);
  Vector k(6);
  k << 1, 2, 3, 4, 5, 6;
  m.set(1, 1, SparseMatrix::identity(1, k(0)));
  m.set(2, 2, diagonal_matrix(k.segment(1, 2)));
  m.set(3, 3, SparseMatrix::identity(1, k(3)));
  m.set(4, 4, SparseMatrix::identity(1, k(4)));
  m.set(5, 5, SparseMatrix::identity(1, k(5)));
  CHECK(assemble_monolithic(m).to_dense() == DenseMatrix(k.asDiagonal()));
}

TEST_CASE("split and assemble are mutually inverse") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const BlockLayout l = layout_for(trial % 4, 3 + trial * 5, trial % 3 == 0 ? 0 : 2 * (trial % 4) + 1, 4 + trial * 3);
    const BlockMatrix5 m = random_system(l, rng);
    const SparseMatrix a = assemble_monolithic(m);
    CHECK(a.rows() <= 200);
    const BlockMatrix5 back = split_blocks(a, l);
    for (int i = 1; i <= 5; ++i)
      for (int j = 1; j <= 5; ++j) {
        CHECK(m.has(i, j) == back.has(i, j));
        if (m.has(i, j)) CHECK(m.block(i, j) == back.block(i, j));
      }
    CHECK(assemble_monolithic(back) == a);
  }
  CHECK_THROWS_AS(split_blocks(SparseMatrix::identity(4), layout_for(0, 2, 0, 3)), DimensionError);
}

TEST_CASE("set rejects wrong shapes and layout validation") {
  BlockMatrix5 m(layout_for(1, 3, 1, 2));
  CHECK_THROWS_WITH_AS(m.set(3, 5, SparseMatrix(2, 2)), doctest::Contains("(3,5)"), DimensionError);
  BlockLayout bad = layout_for(1, 3, 1, 2);
  bad.group_sizes[2] = -1;
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  BlockLayout mismatch = layout_for(1, 3, 1, 2);
  mismatch.group_sizes[1] = 3;
  CHECK_THROWS_AS(mismatch.validate(), DimensionError);
}

TEST_CASE("pattern validator") {
  std::mt19937 rng(12);
  const BlockLayout l = layout_for(2, 10, 3, 6);
  BlockMatrix5 m = random_system(l, rng, 0.5);
  CHECK_NOTHROW(validate_pattern(m));
  for (auto [i, j] : std::vector<std::pair<int, int>>{{1, 3}, {1, 4}, {1, 5}, {3, 1}, {4, 1}, {5, 1},
                                                     {2, 4}, {3, 4}, {4, 2}, {4, 3}}) {
    BlockMatrix5 bad = m;
    bad.set(i, j, SparseMatrix::from_triplets(l.size(i), l.size(j), {{0, 0, 1.0}}));
    CHECK_THROWS_AS(validate_pattern(bad), PatternError);
    // Stored zeros are not structural entries.
    bad.set(i, j, SparseMatrix::from_triplets(l.size(i), l.size(j), {{0, 0, 0.0}}));
    CHECK_NOTHROW(validate_pattern(bad));
  }
}

TEST_CASE("write and read a system round-trip exactly") {
  std::mt19937 rng(13);
  const BlockLayout l = layout_for(3, 20, 6, 15);
  const BlockMatrix5 m = random_system(l, rng);
  Vector rhs = test::random_vector(l.total(), rng);
  rhs(0) = 1.0 / 3.0;
  const auto base = scratch_dir("roundtrip") / "sys";
  write_system(m, rhs, base);
  const LinearSystem back = read_system(base);
  CHECK(back.matrix.layout() == l);
  CHECK(assemble_monolithic(back.matrix) == assemble_monolithic(m));
  CHECK(back.rhs == rhs);
}

TEST_CASE("read_system applies a permutation") {
  std::mt19937 rng(14);
  const BlockLayout l = layout_for(1, 3, 2, 3);
  const BlockMatrix5 m = random_system(l, rng, 0.6);
  const Vector rhs = test::random_vector(l.total(), rng);
  const auto base = scratch_dir("perm") / "sys";
  write_system(m, rhs, base);
  // Reverse the file ordering and record the map back to group order.
  const Index n = l.total();
  const DenseMatrix a = assemble_monolithic(m).to_dense();
  DenseMatrix file_a(n, n);
  Vector file_rhs(n);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) perm[static_cast<std::size_t>(k)] = n - 1 - k;
  for (Index i = 0; i < n; ++i) {
    file_rhs(n - 1 - i) = rhs(i);
    for (Index j = 0; j < n; ++j) file_a(n - 1 - i, n - 1 - j) = a(i, j);
  }
  write_matrix_market(SparseMatrix::from_dense(file_a), base.string() + ".mtx");
  {
    std::ofstream rs(base.string() + ".rhs.txt");
    rs.precision(17);
    for (Index i = 0; i < n; ++i) rs << file_rhs(i) << '\n';
  }
  {
    std::ofstream js(base.string() + ".blocks.json");
    js << "{\"group_sizes\":[2,4,3,2,3],\"spatial_dim\":2,\"fracture_cells\":1,\"permutation\":[";
    for (Index k = 0; k < n; ++k) js << (k ? "," : "") << perm[static_cast<std::size_t>(k)];
    js << "]}";
  }
  const LinearSystem back = read_system(base);
  CHECK(assemble_monolithic(back.matrix).to_dense() == a);
  CHECK(back.rhs == rhs);
}

TEST_CASE("read_system error reporting") {
  std::mt19937 rng(15);
  const BlockLayout l = layout_for(1, 3, 2, 3);
  const BlockMatrix5 m = random_system(l, rng);
  const auto dir = scratch_dir("errors");
  const auto base = dir / "sys";
  write_system(m, Vector::Ones(l.total()), base);

  std::filesystem::remove(base.string() + ".rhs.txt");
  CHECK_THROWS_WITH_AS(read_system(base), doctest::Contains("rhs not found"), ParseError);

  write_system(m, Vector::Ones(l.total()), base);
  {
    std::ofstream js(base.string() + ".blocks.json");
    js << R"({"group_sizes":[2,4,-3,2,3],"spatial_dim":2,"fracture_cells":1})";
  }
  CHECK_THROWS_AS(read_system(base), DimensionError);

  write_system(m, Vector::Ones(l.total()), base);
  {
    std::ofstream mtx(base.string() + ".mtx");
    mtx << "%%MatrixMarket matrix coordinate real general\n% comment\n14 14 2\n1 1 2.0\n2 x 1.0\n";
  }
  CHECK_THROWS_WITH_AS(read_system(base), doctest::Contains(":5:"), ParseError);

  {
    std::ofstream mtx(base.string() + ".mtx");
    mtx << "%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 2.0\n";
  }
  CHECK_THROWS_AS(read_system(base), DimensionError);
}
