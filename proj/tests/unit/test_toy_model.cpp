#include <doctest.h>

#include <random>

#include "fcpm/experiment.hpp"
#include "../support/oracles.hpp"

using namespace fcpm;

namespace {

BoundaryConditions unloaded() {
  BoundaryConditions bc;
  const double p0 = MaterialParams{}.reference_pressure;
  side(bc, Side::South) = {MechanicalBc::Fixed, {0.0, 0.0}, FlowBc::Dirichlet, p0};
  for (Side s : {Side::East, Side::North, Side::West}) side(bc, s) = {MechanicalBc::Traction, {0.0, 0.0}, FlowBc::Dirichlet, p0};
  return bc;
}

Vector group(const Vector& x, const BlockLayout& l, int g) { return x.segment(l.offset(g), l.size(g)); }

// A state a few Newton steps into the first time step of the loaded problem.
ModelState loaded_state(const ToyModel& model, double dt) {
  const auto solver = make_linear_solver(Variant::GmresDirect, SolverOpts{});
  NewtonOptions opts;
  opts.max_newton = 3;
  const ModelState s0 = model.initial_state();
  return newton_solve(model, s0, s0, dt, solver, opts).state;
}

}  // namespace

TEST_CASE("grid construction") {
  const MDGrid g10 = build_grid(10, 10);
  CHECK(g10.frac_cells == 6);
  CHECK(g10.frac_first == 2);
  CHECK(g10.num_contact_nodes() == 5);
  CHECK(g10.num_nodes() == 11 * 11 + 5);
  // 0.6 * 4 = 2.4 rounds to 2.
  CHECK(build_grid(4, 4).frac_cells == 2);
  CHECK_THROWS_AS(build_grid(10, 9), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(2, 4), std::invalid_argument);
  CHECK(build_grid(8, 8, false).frac_cells == 0);

  // Cells on either side of a fracture face share the doubled node only through the contact pair.
  const auto below = g10.element_nodes(3, 4);
  const auto above = g10.element_nodes(3, 5);
  CHECK(below[3] == g10.contact_lower(0));
  CHECK(above[0] == g10.contact_upper(0));
  CHECK(g10.element_nodes(2, 5)[0] == g10.node(2, 5));  // fracture tip is not doubled
}

TEST_CASE("layout follows the contact nodes") {
  const ToyModel model(build_grid(8, 8), MaterialParams{}, unloaded());
  const auto& l = model.layout();
  const Index nc = model.grid().num_contact_nodes();
  CHECK(l.size(1) == 2 * nc);
  CHECK(l.size(2) == 4 * nc);
  CHECK(l.size(4) == 2 * model.grid().frac_cells);
  CHECK(l.size(5) == 64 + model.grid().frac_cells);
  const ModelState s = model.initial_state();
  const ModelState back = model.unpack(model.pack(s));
  CHECK(back.p == s.p);
  CHECK(back.lambda == s.lambda);
  CHECK_THROWS_AS(model.unpack(Vector::Zero(3)), DimensionError);
}

TEST_CASE("unloaded reference state is an equilibrium") {
  const ToyModel model(build_grid(8, 8), MaterialParams{}, unloaded());
  const ModelState s = model.initial_state();
  const Assembly a = model.assemble(s, s, 43200.0);
  CHECK(a.residual.cwiseAbs().maxCoeff() == 0.0);
  validate_pattern(a.jacobian);
  CHECK(count_states(a.contact).open == model.grid().num_contact_nodes());
}

TEST_CASE("Jacobian matches finite differences") {
  const Scenario sc = apply_scenario("single_frac_gmres");
  const ToyModel model = build_model(sc, 8, 0.577, 1.2e9);
  const double dt = sc.schedule.dt;
  const ModelState prev = model.initial_state();
  const ModelState base = loaded_state(model, dt);
  std::mt19937 rng(7);
  for (int k = 0; k < 3; ++k) {
    const ModelState s = oracle::perturb(model, base, 1e-3, rng);
    const Assembly a = model.assemble(s, prev, dt);
    validate_pattern(a.jacobian);
    const DenseMatrix j = assemble_monolithic(a.jacobian).to_dense();
    const DenseMatrix fd = oracle::fd_jacobian(model, s, prev, dt, a.contact);
    CHECK(oracle::worst_block_error(j, fd, model.layout()) <= 1e-5);
  }
}

TEST_CASE("cubic law Jacobian matches finite differences") {
  Scenario sc = apply_scenario("single_frac_gmres");
  sc.params.cubic_law = true;
  const ToyModel model = build_model(sc, 8, 0.577, 1.2e9);
  const double dt = sc.schedule.dt;
  const ModelState prev = model.initial_state();
  std::mt19937 rng(11);
  const ModelState s = oracle::perturb(model, loaded_state(model, dt), 1e-3, rng);
  const Assembly a = model.assemble(s, prev, dt);
  const DenseMatrix fd = oracle::fd_jacobian(model, s, prev, dt, a.contact);
  CHECK(oracle::worst_block_error(assemble_monolithic(a.jacobian).to_dense(), fd, model.layout()) <= 1e-5);
}

TEST_CASE("cubic law reduces to a^2/12 at the residual aperture") {
  MaterialParams cubic;
  cubic.cubic_law = true;
  MaterialParams constant;
  constant.fracture_permeability = cubic.residual_aperture * cubic.residual_aperture / 12.0;
  const ToyModel mc(build_grid(10, 10), cubic, unloaded());
  const ToyModel mk(build_grid(10, 10), constant, unloaded());
  const ModelState s = mc.initial_state();
  const SparseMatrix jc = mc.assemble(s, s, 100.0).jacobian.block(5, 5);
  const SparseMatrix jk = mk.assemble(s, s, 100.0).jacobian.block(5, 5);
  CHECK((jc.to_dense() - jk.to_dense()).cwiseAbs().maxCoeff() <= 1e-12 * jk.to_dense().cwiseAbs().maxCoeff());

  // Doubling the aperture everywhere multiplies the fracture transmissibility by 8.
  ModelState wide = s;
  const Index nc = mc.grid().num_contact_nodes();
  for (Index c = 0; c < nc; ++c) wide.u_interface(4 * c + 3) = cubic.residual_aperture;
  const Vector ap = mc.apertures(wide);
  CHECK(ap(2) == doctest::Approx(2.0 * cubic.residual_aperture));
  const Index f0 = mc.grid().num_cells();
  const double t_ref = -jc.coeff(f0 + 2, f0 + 3);
  const double t_wide = -mc.assemble(wide, wide, 100.0).jacobian.block(5, 5).coeff(f0 + 2, f0 + 3);
  CHECK(t_wide == doctest::Approx(8.0 * t_ref).epsilon(1e-12));
}

TEST_CASE("no Biot coupling means no mechanics-flow blocks") {
  Scenario sc = apply_scenario("single_frac_gmres");
  sc.params.biot = 0.0;
  const ToyModel model = build_model(sc, 8, 0.577, 1.2e9);
  ModelState s = model.initial_state();
  s.lambda.setZero();
  s.p(5) += 1e-5;
  const auto open = model.classify_contact(s, s);
  REQUIRE(count_states(open).open == model.grid().num_contact_nodes());
  const Assembly a = model.assemble(s, s, 43200.0, open);
  CHECK_FALSE(a.jacobian.has(3, 5));
  CHECK_FALSE(a.jacobian.has(5, 3));
}

TEST_CASE("mass rows balance storage against boundary inflow") {
  // Summed mass rows: interior and interface fluxes cancel, leaving
  // storage change minus inflow through Dirichlet faces.
  const Scenario sc = apply_scenario("single_frac_gmres");
  const ToyModel model = build_model(sc, 8, 0.577, 1.2e9);
  const double dt = sc.schedule.dt;
  const ModelState prev = model.initial_state();
  std::mt19937 rng(5);
  for (int k = 0; k < 3; ++k) {
    const ModelState s = oracle::perturb(model, loaded_state(model, dt), 1e-2, rng);
    const Vector r = model.assemble(s, prev, dt).residual;
    const double rows = group(r, model.layout(), 5).sum() * dt;
    const double expected = model.fluid_content(s) - model.fluid_content(prev) - model.boundary_inflow(s, dt);
    const double scale = std::abs(model.fluid_content(s) - model.fluid_content(prev)) + std::abs(model.boundary_inflow(s, dt));
    CHECK(std::abs(rows - expected) <= 1e-10 * scale);
  }
}

TEST_CASE("Newton examples") {
  const auto solver = make_linear_solver(Variant::GmresDirect, SolverOpts{});

  SUBCASE("zero load increment converges in one iteration") {
    const ToyModel model(build_grid(8, 8), MaterialParams{}, unloaded());
    const ModelState s = model.initial_state();
    const auto r = newton_solve(model, s, s, 43200.0, solver);
    CHECK(r.report.converged);
    CHECK(r.report.iterations.size() == 1);
  }

  SUBCASE("compression without overpressure sticks everywhere") {
    Scenario sc = apply_scenario("single_frac_gmres");
    side(sc.bc, Side::East).pressure = sc.params.reference_pressure;
    const ToyModel model = build_model(sc, 8, 0.577, 1.2e9);
    const ModelState s = model.initial_state();
    const auto r = newton_solve(model, s, s, sc.schedule.dt, solver);
    CHECK(r.report.converged);
    const auto states = model.classify_contact(r.state, s);
    CHECK(count_states(states).stick == model.grid().num_contact_nodes());
  }

  SUBCASE("high east pressure opens part of the fracture") {
    const Scenario sc = apply_scenario("single_frac_gmres");
    const ToyModel model = build_model(sc, 16, 0.577, 1.2e9);
    const auto sim = simulate(model, sc.schedule, solver);
    for (const auto& st : sim.steps) CHECK(st.newton.converged);
    CHECK(sim.steps.back().newton.final_contact.open >= 1);
  }

  SUBCASE("divergence is reported with its history") {
    const ToyModel model = build_model(apply_scenario("single_frac_gmres"), 8, 0.577, 1.2e9);
    const ModelState s = model.initial_state();
    const LinearSolver wrong = [](const LinearProblem& lp) {
      SolveResult out;
      out.x = -10.0 * lp.rhs;  // pushes away from the root
      return out;
    };
    NewtonOptions opts;
    opts.max_newton = 50;
    try {
      newton_solve(model, s, s, 43200.0, wrong, opts);
      FAIL("expected divergence");
    } catch (const NewtonDivergence& e) {
      CHECK(e.history().size() >= 6);
    }
  }
}

TEST_CASE("scenarios") {
  const auto rich = apply_scenario("single_frac_richardson");
  CHECK(rich.friction_sweep == std::vector<double>{0.1, 0.577, 0.8});
  CHECK(rich.stiffness_sweep == std::vector<double>{0.0, 1.2e5, 1.2e9, 1.2e13, 1.2e17, 1.2e20});
  CHECK(rich.schedule.dt == 43200.0);
  CHECK(rich.schedule.steps == 6);
  const auto gm = apply_scenario("single_frac_gmres");
  CHECK(side(gm.bc, Side::East).pressure == doctest::Approx(13.0 * gm.params.reference_pressure));
  CHECK(side(gm.bc, Side::South).mechanics == MechanicalBc::Fixed);
  CHECK(apply_scenario("refinement").grids == std::vector<Index>{8, 16, 32, 64});
  CHECK_FALSE(apply_scenario("biot_column").fractured);
  CHECK_THROWS_AS(apply_scenario("three_fractures"), std::invalid_argument);
  for (const auto& n : scenario_names()) CHECK_NOTHROW(apply_scenario(n));
}
