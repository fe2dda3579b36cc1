#include "fcpm/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fcpm {

double MaterialParams::young_modulus() const {
  return shear_modulus * (3.0 * lame + 2.0 * shear_modulus) / (lame + shear_modulus);
}

void MaterialParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("material: ") + name + " must be positive");
  };
  positive(shear_modulus, "shear_modulus");
  positive(lame, "lame");
  positive(compressibility, "compressibility");
  positive(viscosity, "viscosity");
  positive(permeability, "permeability");
  positive(fracture_permeability, "fracture_permeability");
  positive(residual_aperture, "residual_aperture");
  positive(density, "density");
  positive(augmentation, "augmentation");
  positive(characteristic_traction, "characteristic_traction");
  if (!(biot >= 0.0 && biot <= 1.0)) throw std::invalid_argument("material: biot must lie in [0, 1]");
  if (!(porosity > 0.0 && porosity < 1.0)) throw std::invalid_argument("material: porosity must lie in (0, 1)");
  if (!std::isfinite(reference_pressure)) throw std::invalid_argument("material: reference_pressure not finite");
  contact.validate();
}

std::array<Index, 4> MDGrid::element_nodes(Index i, Index j) const {
  std::array<Index, 4> n{node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
  if (j == frac_row() && frac_cells > 0) {
    // Bottom corners on the fracture row take the upper copy.
    for (int a = 0; a < 2; ++a) {
      const Index ni = i + a;
      const Index c = ni - frac_first - 1;
      if (c >= 0 && c < num_contact_nodes()) n[static_cast<std::size_t>(a)] = contact_upper(c);
    }
  }
  return n;
}

MDGrid build_grid(Index nx, Index ny, bool fractured) {
  if (nx < 4 || ny < 4) throw std::invalid_argument("build_grid: nx and ny must be at least 4");
  if (ny % 2 != 0) throw std::invalid_argument("build_grid: ny must be even so the fracture lies on a face row");
  MDGrid g;
  g.nx = nx;
  g.ny = ny;
  if (!fractured) return g;
  g.frac_first = std::lround(0.2 * static_cast<double>(nx));
  g.frac_cells = std::lround(0.6 * static_cast<double>(nx));
  if (g.frac_first < 1 || g.frac_cells < 2 || g.frac_first + g.frac_cells > nx - 1)
    throw std::invalid_argument("build_grid: fracture cannot be aligned with grid faces");
  for (Index s = 0; s < g.frac_cells; ++s) {
    g.cells_below.push_back(g.cell(g.frac_first + s, g.frac_row() - 1));
    g.cells_above.push_back(g.cell(g.frac_first + s, g.frac_row()));
  }
  return g;
}

namespace {

// Local dof 2a + comp of the bilinear element with corners (sw, se, ne, nw).
constexpr std::array<double, 4> kXi{-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kEta{-1.0, -1.0, 1.0, 1.0};

bool on_side(const MDGrid& g, Index i, Index j, Side s) {
  switch (s) {
    case Side::South: return j == 0;
    case Side::North: return j == g.ny;
    case Side::West: return i == 0;
    case Side::East: return i == g.nx;
  }
  return false;
}

class Triplets {
 public:
  void add(Index r, Index c, double v) {
    if (r >= 0 && c >= 0 && v != 0.0) t_.push_back({r, c, v});
  }
  SparseMatrix build(Index n) const { return SparseMatrix::from_triplets(n, n, t_); }

 private:
  std::vector<Triplet<double>> t_;
};

}  // namespace

ToyModel::ToyModel(MDGrid grid, MaterialParams params, BoundaryConditions bc)
    : grid_(std::move(grid)), params_(std::move(params)), bc_(bc) {
  params_.validate();
  const double e = params_.young_modulus();
  contact_ = params_.contact;
  contact_.c = params_.augmentation * params_.shear_modulus / grid_.hx() / e;
  contact_.normal_stiffness = params_.contact.normal_stiffness / e;
  contact_.validate();

  const Index nc = grid_.num_contact_nodes();
  node_dof_.assign(static_cast<std::size_t>(2 * grid_.num_nodes()), 0);
  for (Index j = 0; j <= grid_.ny; ++j)
    for (Index i = 0; i <= grid_.nx; ++i)
      for (Side s : {Side::South, Side::East, Side::North, Side::West}) {
        if (!on_side(grid_, i, j, s)) continue;
        const auto kind = side(bc_, s).mechanics;
        const Index n = grid_.node(i, j);
        if (kind == MechanicalBc::Fixed) {
          node_dof_[static_cast<std::size_t>(2 * n)] = -1;
          node_dof_[static_cast<std::size_t>(2 * n + 1)] = -1;
        } else if (kind == MechanicalBc::RollerNormal) {
          const int comp = (s == Side::South || s == Side::North) ? 1 : 0;
          node_dof_[static_cast<std::size_t>(2 * n + comp)] = -1;
        }
      }

  std::vector<bool> interface_node(static_cast<std::size_t>(grid_.num_nodes()), false);
  for (Index c = 0; c < nc; ++c) {
    interface_node[static_cast<std::size_t>(grid_.contact_lower(c))] = true;
    interface_node[static_cast<std::size_t>(grid_.contact_upper(c))] = true;
  }
  Index n3 = 0;
  for (Index n = 0; n < grid_.num_nodes(); ++n) {
    if (interface_node[static_cast<std::size_t>(n)]) continue;
    for (int comp = 0; comp < 2; ++comp)
      if (node_dof_[static_cast<std::size_t>(2 * n + comp)] == 0) ++n3;
  }

  layout_.spatial_dim = 2;
  layout_.fracture_cells = nc;
  layout_.group_sizes = {2 * nc, 4 * nc, n3, 2 * grid_.frac_cells, grid_.num_cells() + grid_.frac_cells};
  layout_.validate();

  const Index o2 = layout_.offset(2), o3 = layout_.offset(3);
  for (Index c = 0; c < nc; ++c)
    for (int comp = 0; comp < 2; ++comp) {
      node_dof_[static_cast<std::size_t>(2 * grid_.contact_lower(c) + comp)] = o2 + 4 * c + comp;
      node_dof_[static_cast<std::size_t>(2 * grid_.contact_upper(c) + comp)] = o2 + 4 * c + 2 + comp;
    }
  Index next = o3;
  for (Index n = 0; n < grid_.num_nodes(); ++n) {
    if (interface_node[static_cast<std::size_t>(n)]) continue;
    for (int comp = 0; comp < 2; ++comp) {
      auto& d = node_dof_[static_cast<std::size_t>(2 * n + comp)];
      d = d == 0 ? next++ : -1;
    }
  }

  // Plane-strain bilinear element, 2x2 Gauss rule.
  const double hx = grid_.hx(), hy = grid_.hy();
  const double lam = params_.lame / kStressUnit, mu = params_.shear_modulus / kStressUnit;
  const double gp = 1.0 / std::sqrt(3.0);
  const double det = hx * hy / 4.0;
  for (double xi : {-gp, gp})
    for (double eta : {-gp, gp}) {
      std::array<double, 4> dx{}, dy{};
      for (int a = 0; a < 4; ++a) {
        dx[static_cast<std::size_t>(a)] = 0.25 * kXi[a] * (1.0 + kEta[a] * eta) * 2.0 / hx;
        dy[static_cast<std::size_t>(a)] = 0.25 * kEta[a] * (1.0 + kXi[a] * xi) * 2.0 / hy;
      }
      for (int a = 0; a < 4; ++a) {
        bk_[2 * a] += dx[a] * det;
        bk_[2 * a + 1] += dy[a] * det;
        for (int b = 0; b < 4; ++b) {
          ke_[2 * a][2 * b] += ((lam + 2 * mu) * dx[a] * dx[b] + mu * dy[a] * dy[b]) * det;
          ke_[2 * a][2 * b + 1] += (lam * dx[a] * dy[b] + mu * dy[a] * dx[b]) * det;
          ke_[2 * a + 1][2 * b] += (lam * dy[a] * dx[b] + mu * dx[a] * dy[b]) * det;
          ke_[2 * a + 1][2 * b + 1] += ((lam + 2 * mu) * dy[a] * dy[b] + mu * dx[a] * dx[b]) * det;
        }
      }
    }
}

ModelState ToyModel::initial_state() const {
  ModelState s;
  const auto& north = side(bc_, Side::North);
  const double ln = north.mechanics == MechanicalBc::Traction ? north.traction[1] / params_.young_modulus() : 0.0;
  const Index nc = grid_.num_contact_nodes();
  s.lambda = Vector::Zero(2 * nc);
  for (Index c = 0; c < nc; ++c) s.lambda(2 * c) = ln;
  s.u_interface = Vector::Zero(layout_.size(2));
  s.u = Vector::Zero(layout_.size(3));
  s.flux = Vector::Zero(layout_.size(4));
  const double p0 = params_.reference_pressure / kStressUnit;
  s.p = Vector::Constant(grid_.num_cells(), p0);
  s.p_frac = Vector::Constant(grid_.frac_cells, p0);
  return s;
}

Vector ToyModel::pack(const ModelState& s) const {
  const std::array<const Vector*, 5> parts{&s.lambda, &s.u_interface, &s.u, &s.flux, nullptr};
  Vector x(layout_.total());
  for (int g = 1; g <= 4; ++g) {
    const Vector& v = *parts[static_cast<std::size_t>(g - 1)];
    if (v.size() != layout_.size(g)) throw DimensionError("toy model: state group " + std::to_string(g) + " has wrong length");
    x.segment(layout_.offset(g), v.size()) = v;
  }
  if (s.p.size() != grid_.num_cells() || s.p_frac.size() != grid_.frac_cells)
    throw DimensionError("toy model: pressure vectors have wrong length");
  x.segment(layout_.offset(5), s.p.size()) = s.p;
  x.tail(s.p_frac.size()) = s.p_frac;
  if (!x.allFinite()) throw NumericalError("toy model: non-finite state");
  return x;
}

ModelState ToyModel::unpack(const Vector& x) const {
  if (x.size() != layout_.total()) throw DimensionError("toy model: vector length does not match the layout");
  ModelState s;
  s.lambda = x.segment(layout_.offset(1), layout_.size(1));
  s.u_interface = x.segment(layout_.offset(2), layout_.size(2));
  s.u = x.segment(layout_.offset(3), layout_.size(3));
  s.flux = x.segment(layout_.offset(4), layout_.size(4));
  s.p = x.segment(layout_.offset(5), grid_.num_cells());
  s.p_frac = x.tail(grid_.frac_cells);
  return s;
}

namespace {

// (normal, tangential) jump of contact node c: upper minus lower copy.
Vector node_jump(const Vector& u_interface, Index c) {
  Vector j(2);
  j(0) = u_interface(4 * c + 3) - u_interface(4 * c + 1);
  j(1) = u_interface(4 * c + 2) - u_interface(4 * c);
  return j;
}

}  // namespace

std::vector<ContactCellState> ToyModel::classify_contact(const ModelState& s, const ModelState& prev) const {
  std::vector<ContactCellState> cells;
  for (Index c = 0; c < grid_.num_contact_nodes(); ++c) {
    const Vector jump = node_jump(s.u_interface, c);
    const Vector slip = jump.tail(1) - node_jump(prev.u_interface, c).tail(1);
    cells.push_back(classify(s.lambda.segment(2 * c, 2), jump, slip, contact_));
  }
  return cells;
}

Vector ToyModel::apertures(const ModelState& s) const {
  const Index nc = grid_.num_contact_nodes();
  Vector a(grid_.frac_cells);
  for (Index f = 0; f < grid_.frac_cells; ++f) {
    double sum = 0.0;
    if (f - 1 >= 0) sum += node_jump(s.u_interface, f - 1)(0);
    if (f < nc) sum += node_jump(s.u_interface, f)(0);
    a(f) = params_.residual_aperture + 0.5 * sum;
  }
  return a;
}

Assembly ToyModel::assemble(const ModelState& s, const ModelState& prev, double dt) const {
  return assemble(s, prev, dt, classify_contact(s, prev));
}

Assembly ToyModel::assemble(const ModelState& s, const ModelState& prev, double dt,
                            const std::vector<ContactCellState>& frozen) const {
  if (!(dt > 0.0)) throw std::invalid_argument("assemble: time step must be positive");
  const Index nc = grid_.num_contact_nodes();
  if (static_cast<Index>(frozen.size()) != nc) throw DimensionError("assemble: one contact state per contact node expected");
  const Vector x = pack(s);
  const Vector x_prev = pack(prev);
  const Index n = layout_.total();
  Vector r = Vector::Zero(n);
  Triplets jac;

  const auto& mp = params_;
  const double hx = grid_.hx(), hy = grid_.hy(), area = hx * hy;
  const double p0 = mp.reference_pressure / kStressUnit;
  const double alpha = mp.biot;
  const double cf = mp.compressibility * kStressUnit;
  const double inv_m = (mp.biot - mp.porosity) * (1.0 - mp.biot) / (mp.lame + 2.0 * mp.shear_modulus / 3.0) * kStressUnit;
  const double mobility = mp.permeability / mp.viscosity * kStressUnit;
  const double e = mp.young_modulus() / kStressUnit;
  const Index o1 = layout_.offset(1), o2 = layout_.offset(2), o4 = layout_.offset(4), o5 = layout_.offset(5);
  const Index of = o5 + grid_.num_cells();

  const auto dof = [&](Index node, int comp) { return node_dof_[static_cast<std::size_t>(2 * node + comp)]; };
  const auto val = [](const Vector& v, Index i) { return i >= 0 ? v(i) : 0.0; };

  // Momentum balance and matrix mass, element by element.
  for (Index j = 0; j < grid_.ny; ++j)
    for (Index i = 0; i < grid_.nx; ++i) {
      const Index cell = grid_.cell(i, j);
      const Index pr = o5 + cell;
      const auto nodes = grid_.element_nodes(i, j);
      std::array<Index, 8> d{};
      for (int a = 0; a < 4; ++a)
        for (int comp = 0; comp < 2; ++comp) d[2 * a + comp] = dof(nodes[static_cast<std::size_t>(a)], comp);
      const double dp = x(pr) - p0;
      double div = 0.0, div_prev = 0.0;
      for (int a = 0; a < 8; ++a) {
        div += bk_[a] * val(x, d[a]);
        div_prev += bk_[a] * val(x_prev, d[a]);
      }
      for (int a = 0; a < 8; ++a) {
        if (d[a] < 0) continue;
        double f = -alpha * dp * bk_[a];
        for (int b = 0; b < 8; ++b) {
          f += ke_[a][b] * val(x, d[b]);
          if (d[b] >= 0) jac.add(d[a], d[b], ke_[a][b]);
        }
        r(d[a]) += f;
        jac.add(d[a], pr, -alpha * bk_[a]);
      }

      const double dp_prev = x_prev(pr) - p0;
      const double phi = mp.porosity + alpha * div / area + inv_m * dp;
      const double phi_prev = mp.porosity + alpha * div_prev / area + inv_m * dp_prev;
      const double m = phi * (1.0 + cf * dp);
      const double m_prev = phi_prev * (1.0 + cf * dp_prev);
      if (!std::isfinite(m) || !std::isfinite(m_prev))
        throw NumericalError("assemble: non-finite fluid content in matrix cell " + std::to_string(cell));
      r(pr) += area * (m - m_prev) / dt;
      jac.add(pr, pr, area / dt * (inv_m * (1.0 + cf * dp) + phi * cf));
      for (int a = 0; a < 8; ++a)
        if (d[a] >= 0) jac.add(pr, d[a], alpha * bk_[a] * (1.0 + cf * dp) / dt);
    }

  // Boundary tractions, lumped to the edge end nodes.
  for (Side sd : {Side::South, Side::East, Side::North, Side::West}) {
    const auto& b = side(bc_, sd);
    if (b.mechanics != MechanicalBc::Traction) continue;
    const bool horizontal = sd == Side::South || sd == Side::North;
    const Index edges = horizontal ? grid_.nx : grid_.ny;
    const double len = horizontal ? hx : hy;
    for (Index k = 0; k < edges; ++k)
      for (Index end : {k, k + 1}) {
        const Index node = horizontal ? grid_.node(end, sd == Side::South ? 0 : grid_.ny)
                                      : grid_.node(sd == Side::West ? 0 : grid_.nx, end);
        for (int comp = 0; comp < 2; ++comp) {
          const Index di = dof(node, comp);
          if (di >= 0) r(di) -= b.traction[static_cast<std::size_t>(comp)] / kStressUnit * 0.5 * len;
        }
      }
  }

  // Matrix Darcy fluxes.
  const auto connect = [&](Index k, Index l, double t) {
    const Index rk = o5 + k, rl = o5 + l;
    const double q = t * (x(rk) - x(rl));
    r(rk) += q;
    r(rl) -= q;
    jac.add(rk, rk, t);
    jac.add(rk, rl, -t);
    jac.add(rl, rl, t);
    jac.add(rl, rk, -t);
  };
  const auto is_fracture_face = [&](Index i, Index j_above) {
    return j_above == grid_.frac_row() && i >= grid_.frac_first && i < grid_.frac_first + grid_.frac_cells;
  };
  for (Index j = 0; j < grid_.ny; ++j)
    for (Index i = 0; i < grid_.nx; ++i) {
      if (i + 1 < grid_.nx) connect(grid_.cell(i, j), grid_.cell(i + 1, j), mobility * hy / hx);
      if (j + 1 < grid_.ny && !is_fracture_face(i, j + 1))
        connect(grid_.cell(i, j), grid_.cell(i, j + 1), mobility * hx / hy);
    }
  for (Side sd : {Side::South, Side::East, Side::North, Side::West}) {
    const auto& b = side(bc_, sd);
    if (b.flow != FlowBc::Dirichlet) continue;
    const bool horizontal = sd == Side::South || sd == Side::North;
    const double t = horizontal ? 2.0 * mobility * hx / hy : 2.0 * mobility * hy / hx;
    const Index count = horizontal ? grid_.nx : grid_.ny;
    for (Index k = 0; k < count; ++k) {
      const Index cell = horizontal ? grid_.cell(k, sd == Side::South ? 0 : grid_.ny - 1)
                                    : grid_.cell(sd == Side::West ? 0 : grid_.nx - 1, k);
      const Index rk = o5 + cell;
      r(rk) += t * (x(rk) - b.pressure / kStressUnit);
      jac.add(rk, rk, t);
    }
  }

  // Fracture: mass, tangential flow, matrix exchange and fluid load on the walls.
  const Vector ap = apertures(s);
  const Vector ap_prev = apertures(prev);
  const auto kf = [&](double a) { return mp.cubic_law ? a * a / 12.0 : mp.fracture_permeability; };
  const double kappa = kf(mp.residual_aperture) / mp.viscosity * kStressUnit * 2.0 / mp.residual_aperture;
  for (Index f = 0; f < grid_.frac_cells; ++f) {
    // Overlapping walls are harmless for a constant permeability; Newton may
    // pass through them on the way to a feasible state.
    if (mp.cubic_law && (!(ap(f) > 0.0) || !(ap_prev(f) > 0.0)))
      throw NumericalError("assemble: nonpositive aperture in fracture cell " + std::to_string(f));
    const Index rf = of + f;
    const double dpf = x(rf) - p0;
    const double m = ap(f) * (1.0 + cf * dpf);
    const double m_prev = ap_prev(f) * (1.0 + cf * (x_prev(rf) - p0));
    r(rf) += hx * (m - m_prev) / dt;
    jac.add(rf, rf, hx * ap(f) * cf / dt);
    // Aperture sensitivity: half of each end node's normal jump.
    const double dm_da = hx * (1.0 + cf * dpf) / dt;
    for (Index c : {f - 1, f}) {
      if (c < 0 || c >= nc) continue;
      jac.add(rf, o2 + 4 * c + 3, 0.5 * dm_da);
      jac.add(rf, o2 + 4 * c + 1, -0.5 * dm_da);
    }

    for (int sidek = 0; sidek < 2; ++sidek) {
      const Index rv = o4 + 2 * f + sidek;
      const Index cell = sidek == 0 ? grid_.cells_below[static_cast<std::size_t>(f)]
                                    : grid_.cells_above[static_cast<std::size_t>(f)];
      const Index rp = o5 + cell;
      r(rv) = hx * (x(rv) + kappa * (x(rf) - x(rp)));
      jac.add(rv, rv, hx);
      jac.add(rv, rf, hx * kappa);
      jac.add(rv, rp, -hx * kappa);
      r(rp) += hx * x(rv);
      jac.add(rp, rv, hx);
      r(rf) -= hx * x(rv);
      jac.add(rf, rv, -hx);
    }

    // Fluid pressure on the walls, split between the cell's end nodes.
    for (Index c : {f - 1, f}) {
      if (c < 0 || c >= nc) continue;
      const Index lower_y = o2 + 4 * c + 1, upper_y = o2 + 4 * c + 3;
      r(upper_y) -= dpf * 0.5 * hx;
      r(lower_y) += dpf * 0.5 * hx;
      jac.add(upper_y, rf, -0.5 * hx);
      jac.add(lower_y, rf, 0.5 * hx);
    }
  }
  for (Index f = 0; f + 1 < grid_.frac_cells; ++f) {
    const Index ra = of + f, rb = of + f + 1;
    const double dpab = x(ra) - x(rb);
    if (mp.cubic_law) {
      const double af = 0.5 * (ap(f) + ap(f + 1));
      const double t = af * af * af / 12.0 / mp.viscosity * kStressUnit / hx;
      const double dt_da = 3.0 * af * af / 12.0 / mp.viscosity * kStressUnit / hx;
      r(ra) += t * dpab;
      r(rb) -= t * dpab;
      jac.add(ra, ra, t);
      jac.add(ra, rb, -t);
      jac.add(rb, rb, t);
      jac.add(rb, ra, -t);
      // d af / d jump_n of the end nodes of both cells.
      for (Index cell_f : {f, f + 1})
        for (Index c : {cell_f - 1, cell_f}) {
          if (c < 0 || c >= nc) continue;
          const double w = 0.25 * dt_da * dpab;
          for (auto [row, sign] : {std::pair{ra, 1.0}, std::pair{rb, -1.0}}) {
            jac.add(row, o2 + 4 * c + 3, sign * w);
            jac.add(row, o2 + 4 * c + 1, -sign * w);
          }
        }
    } else {
      connect(ra - o5, rb - o5, kf(0.0) * mp.residual_aperture / mp.viscosity * kStressUnit / hx);
    }
  }

  // Contact: force balance on the two copies and complementarity rows.
  std::vector<ContactCellState> cells = frozen;
  const double tangential_scale = mp.young_modulus() / mp.characteristic_traction;
  for (Index c = 0; c < nc; ++c) {
    const Index rl = o1 + 2 * c;
    const Index lx = o2 + 4 * c, ly = lx + 1, ux = lx + 2, uy = lx + 3;
    const double w = hx * e;
    // lambda = (normal, tangential); x is tangential and y normal.
    r(lx) -= w * x(rl + 1);
    r(ly) -= w * x(rl);
    r(ux) += w * x(rl + 1);
    r(uy) += w * x(rl);
    jac.add(lx, rl + 1, -w);
    jac.add(ly, rl, -w);
    jac.add(ux, rl + 1, w);
    jac.add(uy, rl, w);

    const Vector lambda = s.lambda.segment(2 * c, 2);
    const Vector jump = node_jump(s.u_interface, c);
    const Vector slip = jump.tail(1) - node_jump(prev.u_interface, c).tail(1);
    const auto& cell = cells[static_cast<std::size_t>(c)];
    const Vector cr = complementarity_residual(cell, lambda, jump, slip, contact_);
    r(rl) = cr(0);
    r(rl + 1) = cr(1) * tangential_scale;
    const auto lin = linearize_cell(cell, contact_);
    for (int row = 0; row < 2; ++row) {
      const double sc = row == 0 ? 1.0 : tangential_scale;
      for (int col = 0; col < 2; ++col) jac.add(rl + row, rl + col, sc * lin.d_lambda(row, col));
      jac.add(rl + row, uy, sc * lin.d_jump(row, 0));
      jac.add(rl + row, ly, -sc * lin.d_jump(row, 0));
      jac.add(rl + row, ux, sc * lin.d_jump(row, 1));
      jac.add(rl + row, lx, -sc * lin.d_jump(row, 1));
    }
  }

  if (!r.allFinite()) throw NumericalError("assemble: non-finite residual");
  return {std::move(r), split_blocks(jac.build(n), layout_), std::move(cells)};
}

FixedStressParams ToyModel::fixed_stress_params() const {
  FixedStressParams p;
  p.shear_modulus = params_.shear_modulus / kStressUnit;
  p.lame = params_.lame / kStressUnit;
  p.biot = params_.biot;
  p.compressibility = params_.compressibility * kStressUnit;
  p.porosity = params_.porosity;
  p.dim = 2;
  return p;
}

FixedStressData ToyModel::fixed_stress(const ModelState& s, double dt) const {
  const Vector matrix_measure = Vector::Constant(grid_.num_cells(), grid_.hx() * grid_.hy());
  const Vector frac_measure = Vector::Constant(grid_.frac_cells, grid_.hx());
  return fixed_stress_coefficients(fixed_stress_params(), apertures(s), matrix_measure, frac_measure, dt,
                                   params_.residual_aperture);
}

std::vector<int> ToyModel::mechanics_dof_function() const {
  const Index o2 = layout_.offset(2);
  std::vector<int> f(static_cast<std::size_t>(layout_.size(2) + layout_.size(3)), 0);
  for (Index n = 0; n < grid_.num_nodes(); ++n)
    for (int comp = 0; comp < 2; ++comp) {
      const Index d = node_dof_[static_cast<std::size_t>(2 * n + comp)];
      if (d >= 0) f[static_cast<std::size_t>(d - o2)] = comp;
    }
  return f;
}

double ToyModel::fluid_content(const ModelState& s) const {
  const Vector x = pack(s);
  const auto& mp = params_;
  const double area = grid_.hx() * grid_.hy();
  const double p0 = mp.reference_pressure / kStressUnit;
  const double cf = mp.compressibility * kStressUnit;
  const double inv_m = (mp.biot - mp.porosity) * (1.0 - mp.biot) / (mp.lame + 2.0 * mp.shear_modulus / 3.0) * kStressUnit;
  double total = 0.0;
  for (Index j = 0; j < grid_.ny; ++j)
    for (Index i = 0; i < grid_.nx; ++i) {
      const auto nodes = grid_.element_nodes(i, j);
      double div = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int comp = 0; comp < 2; ++comp) {
          const Index d = node_dof_[static_cast<std::size_t>(2 * nodes[static_cast<std::size_t>(a)] + comp)];
          if (d >= 0) div += bk_[2 * a + comp] * x(d);
        }
      const double dp = s.p(grid_.cell(i, j)) - p0;
      total += area * (mp.porosity + mp.biot * div / area + inv_m * dp) * (1.0 + cf * dp);
    }
  const Vector ap = apertures(s);
  for (Index f = 0; f < grid_.frac_cells; ++f) total += grid_.hx() * ap(f) * (1.0 + cf * (s.p_frac(f) - p0));
  return total;
}

double ToyModel::boundary_inflow(const ModelState& s, double dt) const {
  const double mobility = params_.permeability / params_.viscosity * kStressUnit;
  const double hx = grid_.hx(), hy = grid_.hy();
  double q = 0.0;
  for (Side sd : {Side::South, Side::East, Side::North, Side::West}) {
    const auto& b = side(bc_, sd);
    if (b.flow != FlowBc::Dirichlet) continue;
    const bool horizontal = sd == Side::South || sd == Side::North;
    const double t = horizontal ? 2.0 * mobility * hx / hy : 2.0 * mobility * hy / hx;
    const Index count = horizontal ? grid_.nx : grid_.ny;
    for (Index k = 0; k < count; ++k) {
      const Index cell = horizontal ? grid_.cell(k, sd == Side::South ? 0 : grid_.ny - 1)
                                    : grid_.cell(sd == Side::West ? 0 : grid_.nx - 1, k);
      q += t * (b.pressure / kStressUnit - s.p(cell));
    }
  }
  return q * dt;
}

ContactCounts count_states(const std::vector<ContactCellState>& cells) {
  ContactCounts n;
  for (const auto& c : cells) {
    switch (c.state) {
      case ContactState::Open: ++n.open; break;
      case ContactState::Stick: ++n.stick; break;
      case ContactState::Slide: ++n.slide; break;
    }
  }
  return n;
}

NewtonResult newton_solve(const ToyModel& model, const ModelState& start, const ModelState& prev, double dt,
                          const LinearSolver& solver, const NewtonOptions& opts) {
  if (opts.max_newton < 1) throw std::invalid_argument("newton: max_newton must be at least 1");
  NewtonResult out{start, {}};
  auto& rep = out.report;
  Vector x = model.pack(start);
  Assembly as = model.assemble(start, prev, dt);
  double norm = as.residual.norm();
  const double norm0 = norm;
  std::vector<double> history{norm};
  const auto dof_function = model.mechanics_dof_function();
  Index growth = 0;

  for (Index it = 0; it < opts.max_newton; ++it) {
    const FixedStressData fs = model.fixed_stress(out.state, dt);
    const Vector rhs = -as.residual;
    SolveResult lin = solver(LinearProblem{as.jacobian, rhs, fs, dof_function});
    if (!lin.x.allFinite()) throw NumericalError("newton: linear solver returned non-finite update");
    rep.iterations.push_back({norm, count_states(as.contact), std::move(lin.report)});
    x += lin.x;
    out.state = model.unpack(x);
    as = model.assemble(out.state, prev, dt);
    const double next = as.residual.norm();
    history.push_back(next);
    growth = next > norm ? growth + 1 : 0;
    norm = next;
    if (norm <= opts.rtol * norm0 || norm <= opts.atol) {
      rep.converged = true;
      break;
    }
    if (growth >= opts.max_growth)
      throw NewtonDivergence("newton: residual grew in " + std::to_string(growth) + " consecutive iterations",
                             history);
  }
  rep.final_residual = norm;
  rep.final_contact = count_states(as.contact);
  return out;
}

SimulationResult simulate(const ToyModel& model, const Schedule& schedule, const LinearSolver& solver,
                          const NewtonOptions& opts) {
  if (!(schedule.dt > 0.0) || schedule.steps < 1) throw std::invalid_argument("simulate: invalid schedule");
  SimulationResult out;
  out.state = model.initial_state();
  for (Index k = 0; k < schedule.steps; ++k) {
    NewtonResult step = newton_solve(model, out.state, out.state, schedule.dt, solver, opts);
    out.state = std::move(step.state);
    out.steps.push_back({schedule.dt * static_cast<double>(k + 1), std::move(step.report)});
  }
  return out;
}

namespace {

BoundaryConditions fractured_bc(double east_factor, double p0) {
  BoundaryConditions bc;
  side(bc, Side::South) = {MechanicalBc::Fixed, {0.0, 0.0}, FlowBc::Dirichlet, p0};
  side(bc, Side::East) = {MechanicalBc::Traction, {-5e6, 0.0}, FlowBc::Dirichlet, east_factor * p0};
  side(bc, Side::North) = {MechanicalBc::Traction, {0.5e6, -5e6}, FlowBc::Dirichlet, p0};
  side(bc, Side::West) = {MechanicalBc::Traction, {5e6, 0.0}, FlowBc::Dirichlet, p0};
  return bc;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"single_frac_richardson", "single_frac_gmres", "refinement", "biot_column"};
}

Scenario apply_scenario(std::string_view name) {
  Scenario sc;
  sc.name = std::string(name);
  sc.params.contact.friction = 0.577;
  sc.params.contact.normal_stiffness = 1.2e9;
  const double p0 = sc.params.reference_pressure;
  if (name == "single_frac_richardson") {
    // At 10x the fracture stays stuck for F >= 0.577 with K_f = K_m, so the
    // friction coefficient never enters the linearization. 20x opens and
    // slides part of it for every F in the sweep.
    sc.bc = fractured_bc(20.0, p0);
    sc.grids = {16};
    sc.friction_sweep = {0.1, 0.577, 0.8};
    sc.stiffness_sweep = {0.0, 1.2e5, 1.2e9, 1.2e13, 1.2e17, 1.2e20};
  } else if (name == "single_frac_gmres") {
    sc.bc = fractured_bc(13.0, p0);
    sc.grids = {8, 16};
  } else if (name == "refinement") {
    sc.bc = fractured_bc(13.0, p0);
    sc.grids = {8, 16, 32, 64};
  } else if (name == "biot_column") {
    sc.fractured = false;
    side(sc.bc, Side::South) = {MechanicalBc::Fixed, {0.0, 0.0}, FlowBc::NoFlow, p0};
    side(sc.bc, Side::East) = {MechanicalBc::RollerNormal, {0.0, 0.0}, FlowBc::NoFlow, p0};
    side(sc.bc, Side::North) = {MechanicalBc::Traction, {0.0, -5e6}, FlowBc::Dirichlet, p0};
    side(sc.bc, Side::West) = {MechanicalBc::RollerNormal, {0.0, 0.0}, FlowBc::NoFlow, p0};
    sc.grids = {16};
  } else {
    throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
  }
  if (sc.friction_sweep.empty()) sc.friction_sweep = {sc.params.contact.friction};
  if (sc.stiffness_sweep.empty()) sc.stiffness_sweep = {sc.params.contact.normal_stiffness};
  return sc;
}

}  // namespace fcpm
