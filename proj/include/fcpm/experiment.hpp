#pragma once

// Experiment runner: scenario sweeps over grids, friction and normal
// stiffness with one of three linear solver variants, plus report I/O.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fcpm/toy_model.hpp"

namespace fcpm {

/// Invalid or unparseable experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant { GmresDirect, GmresAmg, RichardsonPhat };

std::string_view to_string(Variant v);
/// gmres_direct, gmres_amg or richardson_phat; throws ConfigError otherwise.
Variant parse_variant(std::string_view name);

/// GMRES on J Q_r with the Schur preconditioner (direct or AMG/ILU inner
/// solves), or Richardson with the sequential preconditioner.
LinearSolver make_linear_solver(Variant v, const SolverOpts& opts);
SolverOpts default_solver_opts(Variant v);

struct ExperimentConfig {
  std::string scenario = "single_frac_gmres";
  Variant variant = Variant::GmresDirect;
  std::vector<Index> grids;          ///< empty: scenario default
  std::vector<double> friction;      ///< empty: scenario default
  std::vector<double> stiffness;     ///< empty: scenario default
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;
  std::optional<Index> restart;
  std::optional<Index> max_iters;
  std::optional<double> east_pressure_factor;
  std::optional<Index> steps;
  std::optional<double> dt_days;
  Index max_newton = 20;
  std::filesystem::path out = "out";
};

/// key = value lines; '#' starts a comment; lists are comma separated.
ExperimentConfig parse_config_text(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& file);

struct RunPoint {
  Index grid = 0;
  double friction = 0.0;
  double stiffness = 0.0;
  Index dofs = 0;
  std::vector<StepRecord> steps;
  bool ok = true;
  std::string error;
  double wall_time_s = 0.0;

  Index newton_iterations() const;
  Index linear_iterations() const;
  /// Linear iterations per Newton iteration.
  double avg_linear_iters() const;
  /// Newton iterations per time step.
  double avg_newton_iters() const;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<RunPoint> points;

  bool all_ok() const;
};

/// The scenario with config overrides applied.
Scenario resolve_scenario(const ExperimentConfig& cfg);
ToyModel build_model(const Scenario& sc, Index grid, double friction, double stiffness);

/// Sweep points run in parallel on up to `threads` workers; results keep the
/// sweep order (grid, friction, stiffness).
RunReport run_experiment(const ExperimentConfig& cfg, unsigned threads = 1);

/// Deterministic: no wall-clock values.
nlohmann::json to_json(const RunReport& r);
void write_summary_csv(const RunReport& r, const std::filesystem::path& file);
/// Writes report.json and summary.csv into cfg.out.
void write_outputs(const RunReport& r);

/// Per-metric relative change between the summaries of two report.json files.
/// Throws ParseError on unreadable files or incompatible points.
std::string compare_reports(const std::filesystem::path& a, const std::filesystem::path& b);

/// Thread cap from FCPM_THREADS, else hardware concurrency (at least 1).
unsigned thread_cap();

}  // namespace fcpm
