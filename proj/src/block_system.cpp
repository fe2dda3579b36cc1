#include "fcpm/block_system.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace fcpm {

namespace {

void check_group(int g) {
  if (g < 1 || g > kNumGroups) throw std::out_of_range("block group index " + std::to_string(g) + " not in 1..5");
}

std::string block_name(int i, int j) { return "(" + std::to_string(i) + "," + std::to_string(j) + ")"; }

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  return std::filesystem::path(base.string() + suffix);
}

}  // namespace

Index BlockLayout::offset(int group) const {
  check_group(group);
  Index off = 0;
  for (int g = 1; g < group; ++g) off += size(g);
  return off;
}

Index BlockLayout::total() const { return std::accumulate(group_sizes.begin(), group_sizes.end(), Index{0}); }

std::vector<Index> BlockLayout::indices(int group) const { return index_range(offset(group), size(group)); }

std::vector<Index> BlockLayout::indices(std::initializer_list<int> groups) const {
  std::vector<Index> out;
  for (int g : groups) {
    const auto part = indices(g);
    out.insert(out.end(), part.begin(), part.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void BlockLayout::validate() const {
  for (int g = 1; g <= kNumGroups; ++g)
    if (size(g) < 0) throw DimensionError("group " + std::to_string(g) + " has negative size");
  if (spatial_dim < 1) throw DimensionError("spatial dimension must be positive");
  if (fracture_cells < 0) throw DimensionError("negative fracture cell count");
  if (size(1) != fracture_cells * spatial_dim)
    throw DimensionError("group 1 size " + std::to_string(size(1)) + " != fracture cells x D = " +
                         std::to_string(fracture_cells * spatial_dim));
  if (size(2) != 2 * fracture_cells * spatial_dim)
    throw DimensionError("group 2 size " + std::to_string(size(2)) + " != 2 x fracture cells x D = " +
                         std::to_string(2 * fracture_cells * spatial_dim));
  if (size(5) < 1) throw DimensionError("group 5 must hold at least one pressure unknown");
}

BlockMatrix5::BlockMatrix5(BlockLayout layout) : layout_(layout) {}

std::optional<SparseMatrix>& BlockMatrix5::slot(int i, int j) {
  check_group(i);
  check_group(j);
  return blocks_[static_cast<std::size_t>((i - 1) * kNumGroups + (j - 1))];
}

const std::optional<SparseMatrix>& BlockMatrix5::slot(int i, int j) const {
  check_group(i);
  check_group(j);
  return blocks_[static_cast<std::size_t>((i - 1) * kNumGroups + (j - 1))];
}

const SparseMatrix& BlockMatrix5::block(int i, int j) const {
  const auto& b = slot(i, j);
  if (!b) throw std::out_of_range("block " + block_name(i, j) + " is absent");
  return *b;
}

SparseMatrix BlockMatrix5::block_or_zero(int i, int j) const {
  const auto& b = slot(i, j);
  return b ? *b : SparseMatrix(layout_.size(i), layout_.size(j));
}

void BlockMatrix5::set(int i, int j, SparseMatrix m) {
  if (m.rows() != layout_.size(i) || m.cols() != layout_.size(j))
    throw DimensionError("block " + block_name(i, j) + " has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", layout expects " + std::to_string(layout_.size(i)) + "x" +
                         std::to_string(layout_.size(j)));
  slot(i, j) = std::move(m);
}

SparseMatrix assemble_monolithic(const BlockMatrix5& m) {
  const auto& layout = m.layout();
  const Index n = layout.total();
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  for (int gi = 1; gi <= kNumGroups; ++gi) {
    const Index row0 = layout.offset(gi);
    for (Index r = 0; r < layout.size(gi); ++r) {
      for (int gj = 1; gj <= kNumGroups; ++gj) {
        const auto& b = m.get(gi, gj);
        if (!b) continue;
        if (b->rows() != layout.size(gi) || b->cols() != layout.size(gj))
          throw DimensionError("block " + block_name(gi, gj) + " shape does not match layout");
        const Index col0 = layout.offset(gj);
        for (Index k = b->row_begin(r); k < b->row_end(r); ++k) {
          cols.push_back(col0 + b->col(k));
          vals.push_back(b->value(k));
        }
      }
      offsets[static_cast<std::size_t>(row0 + r) + 1] = static_cast<Index>(cols.size());
    }
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

BlockMatrix5 split_blocks(const SparseMatrix& a, const BlockLayout& layout) {
  if (a.rows() != a.cols()) throw DimensionError("split_blocks: matrix not square");
  if (a.rows() != layout.total())
    throw DimensionError("split_blocks: matrix size " + std::to_string(a.rows()) + " != layout total " +
                         std::to_string(layout.total()));
  BlockMatrix5 m(layout);
  for (int i = 1; i <= kNumGroups; ++i) {
    const auto rows = layout.indices(i);
    for (int j = 1; j <= kNumGroups; ++j) {
      auto b = extract_submatrix(a, std::span<const Index>(rows), std::span<const Index>(layout.indices(j)));
      if (b.nnz() > 0) m.set(i, j, std::move(b));
    }
  }
  return m;
}

bool block_allowed(int i, int j) {
  check_group(i);
  check_group(j);
  if (i == 1) return j == 1 || j == 2;
  if (j == 1) return i == 1 || i == 2;
  if (i == 2 && j == 4) return false;
  if (i == 3 && j == 4) return false;
  if (i == 4 && (j == 2 || j == 3)) return false;
  return true;
}

void validate_pattern(const BlockMatrix5& m) {
  for (int i = 1; i <= kNumGroups; ++i) {
    for (int j = 1; j <= kNumGroups; ++j) {
      if (block_allowed(i, j) || !m.has(i, j)) continue;
      if (m.block(i, j).max_abs() != 0.0)
        throw PatternError("block " + block_name(i, j) + " must be empty in the contact Jacobian structure");
    }
  }
}

void write_matrix_market(const SparseMatrix& a, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  char buf[64];
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = a.row_begin(i); k < a.row_end(i); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", a.value(k));
      out << i + 1 << ' ' << a.col(k) + 1 << ' ' << buf << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

SparseMatrix read_matrix_market(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": matrix file not found");
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(file.string() + ":" + std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) fail("empty file");
  ++line_no;
  {
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" || format != "coordinate")
      fail("expected '%%MatrixMarket matrix coordinate' header");
    if (field != "real" && field != "integer") fail("unsupported field '" + field + "'");
    if (symmetry != "general") fail("unsupported symmetry '" + symmetry + "'");
  }

  Index rows = -1, cols = -1, nnz = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) fail("malformed size line");
    break;
  }
  if (rows < 0) fail("missing size line");

  std::vector<Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nnz));
  while (static_cast<Index>(t.size()) < nnz && std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    Index i = 0, j = 0;
    std::string value_text;
    if (!(ss >> i >> j >> value_text)) fail("malformed entry");
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(value_text, &used);
      if (used != value_text.size()) fail("malformed value '" + value_text + "'");
    } catch (const std::logic_error&) {
      fail("malformed value '" + value_text + "'");
    }
    if (i < 1 || i > rows || j < 1 || j > cols) fail("entry index out of range");
    t.push_back({i - 1, j - 1, v});
  }
  if (static_cast<Index>(t.size()) != nnz)
    fail("expected " + std::to_string(nnz) + " entries, found " + std::to_string(t.size()));
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

void write_system(const BlockMatrix5& m, const Vector& rhs, const std::filesystem::path& base) {
  const auto& layout = m.layout();
  layout.validate();
  if (rhs.size() != layout.total()) throw DimensionError("write_system: rhs length does not match layout");
  write_matrix_market(assemble_monolithic(m), with_suffix(base, ".mtx"));

  nlohmann::json meta;
  meta["group_sizes"] = layout.group_sizes;
  meta["spatial_dim"] = layout.spatial_dim;
  meta["fracture_cells"] = layout.fracture_cells;
  std::ofstream js(with_suffix(base, ".blocks.json"));
  if (!js) throw std::runtime_error("cannot write block metadata next to " + base.string());
  js << meta.dump(2) << '\n';

  std::ofstream rs(with_suffix(base, ".rhs.txt"));
  if (!rs) throw std::runtime_error("cannot write rhs next to " + base.string());
  char buf[64];
  for (Index i = 0; i < rhs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", rhs(i));
    rs << buf << '\n';
  }
}

namespace {

BlockLayout read_layout(const std::filesystem::path& file, std::vector<Index>& permutation) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": block metadata not found");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  BlockLayout layout;
  try {
    const auto sizes = meta.at("group_sizes").get<std::vector<Index>>();
    if (sizes.size() != kNumGroups) throw ParseError(file.string() + ": group_sizes must have 5 entries");
    std::copy(sizes.begin(), sizes.end(), layout.group_sizes.begin());
    layout.spatial_dim = meta.at("spatial_dim").get<Index>();
    layout.fracture_cells = meta.at("fracture_cells").get<Index>();
    if (meta.contains("permutation")) permutation = meta["permutation"].get<std::vector<Index>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  layout.validate();
  return layout;
}

Vector read_rhs(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": rhs not found");
  std::vector<double> vals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(line, &used));
      if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("trailing text");
    } catch (const std::logic_error&) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": malformed value");
    }
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

}  // namespace

LinearSystem read_system(const std::filesystem::path& base) {
  std::vector<Index> perm;
  const BlockLayout layout = read_layout(with_suffix(base, ".blocks.json"), perm);
  SparseMatrix a = read_matrix_market(with_suffix(base, ".mtx"));
  Vector rhs = read_rhs(with_suffix(base, ".rhs.txt"));
  const Index n = layout.total();
  if (a.rows() != n || a.cols() != n)
    throw DimensionError("matrix size " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " does not match layout total " + std::to_string(n));
  if (rhs.size() != n) throw DimensionError("rhs length " + std::to_string(rhs.size()) + " != " + std::to_string(n));

  if (!perm.empty()) {
    if (static_cast<Index>(perm.size()) != n) throw ParseError("permutation length does not match layout");
    std::vector<Index> inverse(perm.size(), -1);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      if (perm[k] < 0 || perm[k] >= n || inverse[static_cast<std::size_t>(perm[k])] != -1)
        throw ParseError("permutation is not a bijection");
      inverse[static_cast<std::size_t>(perm[k])] = static_cast<Index>(k);
    }
    std::vector<Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(a.nnz()));
    for (Index i = 0; i < n; ++i)
      for (Index k = a.row_begin(i); k < a.row_end(i); ++k)
        t.push_back({inverse[static_cast<std::size_t>(i)], inverse[static_cast<std::size_t>(a.col(k))], a.value(k)});
    a = SparseMatrix::from_triplets(n, n, std::move(t));
    Vector permuted(n);
    for (Index k = 0; k < n; ++k) permuted(k) = rhs(perm[static_cast<std::size_t>(k)]);
    rhs = std::move(permuted);
  }
  return {split_blocks(a, layout), std::move(rhs)};
}

}  // namespace fcpm
