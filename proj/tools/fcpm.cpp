// fcpm: run solver experiments on the toy fracture model, compare reports,
// and export linear systems.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "fcpm/experiment.hpp"

namespace fs = std::filesystem;
using namespace fcpm;

namespace {

enum Exit { kOk = 0, kSolverFailure = 1, kConfigError = 2 };

struct Overrides {
  std::string scenario;
  std::vector<Index> grids;
  std::string variant;
  std::string out;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "scenario name");
    cmd->add_option("--grid", grids, "grid sizes (nx = ny), repeatable")->delimiter(',');
    cmd->add_option("--variant", variant, "gmres_direct, gmres_amg or richardson_phat");
    cmd->add_option("--out", out, "output directory");
  }

  void apply(ExperimentConfig& cfg) const {
    if (!scenario.empty()) cfg.scenario = scenario;
    if (!grids.empty()) cfg.grids = grids;
    if (!variant.empty()) cfg.variant = parse_variant(variant);
    if (!out.empty()) cfg.out = out;
  }
};

ExperimentConfig configure(const fs::path& file, const Overrides& o) {
  ExperimentConfig cfg = load_config(file);
  o.apply(cfg);
  resolve_scenario(cfg);  // validates the scenario and overrides early
  return cfg;
}

int run(const fs::path& file, const Overrides& o) {
  const ExperimentConfig cfg = configure(file, o);
  const RunReport rep = run_experiment(cfg, thread_cap());
  write_outputs(rep);
  for (const auto& p : rep.points) {
    std::cout << "grid " << p.grid << "  F " << p.friction << "  K_n " << p.stiffness;
    if (p.ok)
      std::cout << "  linear/newton " << p.avg_linear_iters() << "  newton/step " << p.avg_newton_iters() << '\n';
    else
      std::cout << "  FAILED: " << p.error << '\n';
  }
  std::cout << "wrote " << (cfg.out / "report.json").string() << " and " << (cfg.out / "summary.csv").string() << '\n';
  return rep.all_ok() ? kOk : kSolverFailure;
}

int export_system(const fs::path& file, const Overrides& o) {
  const ExperimentConfig cfg = configure(file, o);
  const Scenario sc = resolve_scenario(cfg);
  const ToyModel model = build_model(sc, sc.grids.front(), sc.friction_sweep.front(), sc.stiffness_sweep.front());
  const ModelState s0 = model.initial_state();
  const Assembly a = model.assemble(s0, s0, sc.schedule.dt);
  fs::create_directories(cfg.out);
  const fs::path base = cfg.out / "system";
  write_system(a.jacobian, -a.residual, base);
  const ContactCounts c = count_states(a.contact);
  std::cout << "wrote " << base.string() << ".{mtx,blocks.json,rhs.txt}: " << model.layout().total() << " unknowns, contact "
            << c.open << " open / " << c.stick << " stick / " << c.slide << " slide\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fracture contact poromechanics preconditioner experiments"};
  app.require_subcommand(1);

  fs::path run_cfg, export_cfg, report_a, report_b;
  Overrides run_over, export_over;

  auto* run_cmd = app.add_subcommand("run", "run the sweep described by a config file");
  run_cmd->add_option("config", run_cfg, "config file")->required();
  run_over.add_to(run_cmd);

  auto* cmp_cmd = app.add_subcommand("compare", "relative change of summary metrics between two reports");
  cmp_cmd->add_option("a", report_a, "baseline report.json")->required();
  cmp_cmd->add_option("b", report_b, "report.json to compare")->required();

  auto* exp_cmd = app.add_subcommand("export-system", "write the first Newton system of the first sweep point");
  exp_cmd->add_option("config", export_cfg, "config file")->required();
  export_over.add_to(exp_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return run(run_cfg, run_over);
    if (*cmp_cmd) {
      std::cout << compare_reports(report_a, report_b);
      return kOk;
    }
    return export_system(export_cfg, export_over);
  } catch (const ConfigError& e) {
    std::cerr << "fcpm: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "fcpm: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "fcpm: " << e.what() << '\n';
    return kSolverFailure;
  }
}
