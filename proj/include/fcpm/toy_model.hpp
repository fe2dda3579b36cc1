#pragma once

// Structured-grid poroelastic model with one horizontal frictional fracture.
//
// The square domain is split into nx x ny quads carrying bilinear displacements
// and cell-centred pressures (two-point fluxes). Displacement nodes strictly
// inside the fracture are doubled: the j copy belongs to the cells below, the
// k copy to the cells above. Contact tractions live on those doubled nodes.
//
// Unknowns are kept in solver units: stresses and pressures in kStressUnit,
// contact traction divided by Young's modulus, displacements in m and
// interface fluxes in m/s. Mass rows are volumetric (m^3/s).

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fcpm/block_system.hpp"
#include "fcpm/contact.hpp"
#include "fcpm/krylov.hpp"
#include "fcpm/precond.hpp"

namespace fcpm {

/// Pa per solver stress unit (a mass unit of 1e10 kg).
inline constexpr double kStressUnit = 1e10;

struct MaterialParams {
  double shear_modulus = 4.2e9;   ///< G, Pa
  double lame = 2.8e9;            ///< Lambda, Pa
  double biot = 0.8;
  double compressibility = 4.6e-10;  ///< c_f, 1/Pa
  double porosity = 0.1;          ///< phi^0
  double viscosity = 1e-3;        ///< Pa s
  double permeability = 1e-13;    ///< K_m, m^2
  /// Constant fracture permeability, m^2. Ignored with cubic_law.
  double fracture_permeability = 1e-13;
  bool cubic_law = false;         ///< K_f = a^2 / 12
  double residual_aperture = 1e-3;  ///< a^0, m
  double density = 1000.0;        ///< rho^0, kg/m^3
  double reference_pressure = 1e6;  ///< p^0, Pa
  /// c = augmentation * G / h. The c field of `contact` is not used.
  double augmentation = 1.0;
  /// Tangential contact rows are divided by this traction (scaled by E), so
  /// they measure slip like the normal rows measure the gap.
  double characteristic_traction = 5e6;
  /// K_n in Pa/m; eps_open is compared with the scaled friction bound.
  ContactParams contact{};

  double young_modulus() const;
  void validate() const;
};

enum class Side { South, East, North, West };
enum class MechanicalBc { Fixed, RollerNormal, Traction };
enum class FlowBc { Dirichlet, NoFlow };

struct SideBc {
  MechanicalBc mechanics = MechanicalBc::Traction;
  std::array<double, 2> traction{0.0, 0.0};  ///< applied (x, y) traction, Pa
  FlowBc flow = FlowBc::NoFlow;
  double pressure = 0.0;  ///< Pa
};

/// Indexed by Side.
using BoundaryConditions = std::array<SideBc, 4>;

inline SideBc& side(BoundaryConditions& bc, Side s) { return bc[static_cast<std::size_t>(s)]; }
inline const SideBc& side(const BoundaryConditions& bc, Side s) { return bc[static_cast<std::size_t>(s)]; }

struct MDGrid {
  Index nx = 0;
  Index ny = 0;
  double lx = 1000.0;
  double ly = 1000.0;
  /// Fracture occupies horizontal faces [frac_first, frac_first + frac_cells) of node row ny/2.
  Index frac_first = 0;
  Index frac_cells = 0;
  std::vector<Index> cells_below;  ///< matrix cell on the j side of each fracture cell
  std::vector<Index> cells_above;  ///< k side

  double hx() const { return lx / static_cast<double>(nx); }
  double hy() const { return ly / static_cast<double>(ny); }
  Index frac_row() const { return ny / 2; }
  Index num_cells() const { return nx * ny; }
  Index cell(Index i, Index j) const { return j * nx + i; }
  /// Doubled nodes, one per interior fracture node.
  Index num_contact_nodes() const { return frac_cells > 0 ? frac_cells - 1 : 0; }
  Index num_nodes() const { return (nx + 1) * (ny + 1) + num_contact_nodes(); }
  Index node(Index i, Index j) const { return j * (nx + 1) + i; }
  /// Lower (j) and upper (k) copies of contact node c.
  Index contact_lower(Index c) const { return node(frac_first + 1 + c, frac_row()); }
  Index contact_upper(Index c) const { return (nx + 1) * (ny + 1) + c; }
  /// Corner nodes (sw, se, ne, nw) of cell (i, j), with doubled nodes resolved.
  std::array<Index, 4> element_nodes(Index i, Index j) const;
};

/// Throws std::invalid_argument for nx, ny < 4, odd ny, or a fracture that
/// does not fit the face row. `fractured = false` gives a plain Biot grid.
MDGrid build_grid(Index nx, Index ny, bool fractured = true);

/// Primary unknowns in solver units.
struct ModelState {
  Vector lambda;       ///< per contact node (normal, tangential) traction / E
  Vector u_interface;  ///< per contact node: j copy (x, y), then k copy (x, y)
  Vector u;            ///< free matrix displacement dofs
  Vector flux;         ///< per fracture cell: v_j, v_k
  Vector p;            ///< matrix pressures
  Vector p_frac;       ///< fracture pressures
};

struct ContactCounts {
  Index open = 0;
  Index stick = 0;
  Index slide = 0;
};

struct Assembly {
  Vector residual;
  BlockMatrix5 jacobian;
  std::vector<ContactCellState> contact;
};

class ToyModel {
 public:
  ToyModel(MDGrid grid, MaterialParams params, BoundaryConditions bc);

  const MDGrid& grid() const { return grid_; }
  const MaterialParams& params() const { return params_; }
  const BoundaryConditions& boundary() const { return bc_; }
  const BlockLayout& layout() const { return layout_; }
  /// Contact parameters with tractions divided by E.
  const ContactParams& scaled_contact() const { return contact_; }

  /// Reference pressure, zero displacement, lambda_n balancing the north load.
  ModelState initial_state() const;

  Vector pack(const ModelState& s) const;
  ModelState unpack(const Vector& x) const;

  /// Residual and Jacobian at `s`, with `prev` the state at the previous time
  /// level. Contact branches are classified at `s`. Throws NumericalError
  /// naming the cell on non-finite constitutive values, or on a nonpositive
  /// aperture under the cubic law.
  Assembly assemble(const ModelState& s, const ModelState& prev, double dt) const;
  /// Same, with contact branches frozen to `frozen`.
  Assembly assemble(const ModelState& s, const ModelState& prev, double dt,
                    const std::vector<ContactCellState>& frozen) const;

  std::vector<ContactCellState> classify_contact(const ModelState& s, const ModelState& prev) const;

  /// Fracture apertures a = a^0 + mean normal jump of the cell's end nodes.
  Vector apertures(const ModelState& s) const;

  FixedStressParams fixed_stress_params() const;
  FixedStressData fixed_stress(const ModelState& s, double dt) const;

  /// Displacement component (0 = x, 1 = y) of each unknown in groups 2 and 3.
  std::vector<int> mechanics_dof_function() const;

  /// Integrated fluid volume (relative to rho^0) stored in matrix and fracture.
  double fluid_content(const ModelState& s) const;
  /// Volumetric inflow through Dirichlet boundary faces over one time step.
  double boundary_inflow(const ModelState& s, double dt) const;

 private:
  MDGrid grid_;
  MaterialParams params_;
  BoundaryConditions bc_;
  ContactParams contact_;
  BlockLayout layout_;
  std::vector<Index> node_dof_;  // 2 per node, -1 when prescribed
  std::array<std::array<double, 8>, 8> ke_{};
  std::array<double, 8> bk_{};  // integral of div N over one element
};

ContactCounts count_states(const std::vector<ContactCellState>& cells);

/// Everything a linear solver needs for one Newton step.
struct LinearProblem {
  const BlockMatrix5& jacobian;
  const Vector& rhs;
  const FixedStressData& fixed_stress;
  const std::vector<int>& mechanics_dof_function;
};

using LinearSolver = std::function<SolveResult(const LinearProblem&)>;

struct NewtonOptions {
  double rtol = 1e-7;
  double atol = 1e-14;
  Index max_newton = 20;
  /// Consecutive residual increases that count as divergence.
  Index max_growth = 5;
};

struct NewtonIteration {
  double residual_norm = 0.0;
  ContactCounts contact;
  SolveReport linear;
};

struct NewtonReport {
  std::vector<NewtonIteration> iterations;
  double final_residual = 0.0;
  bool converged = false;
  ContactCounts final_contact;
};

/// Newton growth limit exceeded; carries the residual history.
class NewtonDivergence : public NumericalError {
 public:
  NewtonDivergence(const std::string& what, std::vector<double> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

struct NewtonResult {
  ModelState state;
  NewtonReport report;
};

/// One implicit time step by semi-smooth Newton. Contact branches are
/// re-classified after every update; at least one linear solve is made.
NewtonResult newton_solve(const ToyModel& model, const ModelState& start, const ModelState& prev, double dt,
                          const LinearSolver& solver, const NewtonOptions& opts = {});

struct Schedule {
  double dt = 43200.0;  ///< s
  Index steps = 6;
};

struct StepRecord {
  double time = 0.0;
  NewtonReport newton;
};

struct SimulationResult {
  ModelState state;
  std::vector<StepRecord> steps;
};

/// Runs the schedule from model.initial_state(). Steps whose Newton loop does
/// not converge are kept; the run continues from the last iterate.
SimulationResult simulate(const ToyModel& model, const Schedule& schedule, const LinearSolver& solver,
                          const NewtonOptions& opts = {});

struct Scenario {
  std::string name;
  MaterialParams params;
  BoundaryConditions bc;
  Schedule schedule;
  bool fractured = true;
  std::vector<Index> grids;
  std::vector<double> friction_sweep;
  std::vector<double> stiffness_sweep;  ///< K_n, Pa/m
};

/// single_frac_richardson, single_frac_gmres, refinement or biot_column.
/// Throws std::invalid_argument for other names.
Scenario apply_scenario(std::string_view name);

std::vector<std::string> scenario_names();

}  // namespace fcpm
