#include "fcpm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace fcpm {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::GmresDirect: return "gmres_direct";
    case Variant::GmresAmg: return "gmres_amg";
    case Variant::RichardsonPhat: return "richardson_phat";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::GmresDirect, Variant::GmresAmg, Variant::RichardsonPhat})
    if (to_string(v) == name) return v;
  throw ConfigError("unknown variant '" + std::string(name) + "' (gmres_direct, gmres_amg, richardson_phat)");
}

SolverOpts default_solver_opts(Variant v) {
  return v == Variant::RichardsonPhat ? SolverOpts::richardson_defaults() : SolverOpts::gmres_defaults();
}

LinearSolver make_linear_solver(Variant v, const SolverOpts& opts) {
  opts.validate();
  if (v == Variant::RichardsonPhat) {
    return [opts](const LinearProblem& lp) {
      const SequentialPreconditioner p(lp.jacobian, lp.fixed_stress.d55);
      const SparseMatrix a = assemble_monolithic(lp.jacobian);
      return richardson(as_operator(a), [&p](const Vector& w) { return p.apply(w); }, lp.rhs, opts);
    };
  }
  const SubsolverKind kind = v == Variant::GmresAmg ? SubsolverKind::Amg : SubsolverKind::Direct;
  return [opts, kind](const LinearProblem& lp) {
    PrecondOptions po;
    po.subsolver = kind;
    po.mechanics_dof_function = lp.mechanics_dof_function;
    const SchurPreconditioner p(lp.jacobian, lp.fixed_stress.d55, po);
    const SparseMatrix a = assemble_monolithic(lp.jacobian);
    return gmres(as_operator(a), [&p](const Vector& w) { return p.apply_untransformed(w); }, lp.rhs, opts);
  };
}

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": expected a number, got '" + s + "'");
}

Index to_index(const std::string& s, const std::string& where) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(where + ": expected an integer, got '" + s + "'");
  return v;
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");

    if (key == "scenario") {
      cfg.scenario = value;
    } else if (key == "variant") {
      cfg.variant = parse_variant(value);
    } else if (key == "grids") {
      cfg.grids.clear();
      for (const auto& g : split_list(value)) cfg.grids.push_back(to_index(g, where));
    } else if (key == "friction") {
      cfg.friction.clear();
      for (const auto& g : split_list(value)) cfg.friction.push_back(to_double(g, where));
    } else if (key == "normal_stiffness") {
      cfg.stiffness.clear();
      for (const auto& g : split_list(value)) cfg.stiffness.push_back(to_double(g, where));
    } else if (key == "rel_tol") {
      cfg.rel_tol = to_double(value, where);
    } else if (key == "abs_tol") {
      cfg.abs_tol = to_double(value, where);
    } else if (key == "restart") {
      cfg.restart = to_index(value, where);
    } else if (key == "max_iters") {
      cfg.max_iters = to_index(value, where);
    } else if (key == "east_pressure_factor") {
      cfg.east_pressure_factor = to_double(value, where);
    } else if (key == "steps") {
      cfg.steps = to_index(value, where);
    } else if (key == "dt_days") {
      cfg.dt_days = to_double(value, where);
    } else if (key == "max_newton") {
      cfg.max_newton = to_index(value, where);
    } else if (key == "out") {
      cfg.out = value;
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), file.string());
}

// ---------------------------------------------------------------- runs

Index RunPoint::newton_iterations() const {
  Index n = 0;
  for (const auto& s : steps) n += static_cast<Index>(s.newton.iterations.size());
  return n;
}

Index RunPoint::linear_iterations() const {
  Index n = 0;
  for (const auto& s : steps)
    for (const auto& it : s.newton.iterations) n += it.linear.iterations;
  return n;
}

double RunPoint::avg_linear_iters() const {
  const Index n = newton_iterations();
  return n > 0 ? static_cast<double>(linear_iterations()) / static_cast<double>(n) : 0.0;
}

double RunPoint::avg_newton_iters() const {
  return steps.empty() ? 0.0 : static_cast<double>(newton_iterations()) / static_cast<double>(steps.size());
}

bool RunReport::all_ok() const {
  return std::all_of(points.begin(), points.end(), [](const RunPoint& p) { return p.ok; });
}

Scenario resolve_scenario(const ExperimentConfig& cfg) {
  Scenario sc;
  try {
    sc = apply_scenario(cfg.scenario);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!cfg.grids.empty()) sc.grids = cfg.grids;
  if (!cfg.friction.empty()) sc.friction_sweep = cfg.friction;
  if (!cfg.stiffness.empty()) sc.stiffness_sweep = cfg.stiffness;
  if (cfg.east_pressure_factor) {
    auto& east = side(sc.bc, Side::East);
    if (east.flow != FlowBc::Dirichlet) throw ConfigError("east_pressure_factor needs a Dirichlet east side");
    east.pressure = *cfg.east_pressure_factor * sc.params.reference_pressure;
  }
  if (cfg.steps) sc.schedule.steps = *cfg.steps;
  if (cfg.dt_days) sc.schedule.dt = *cfg.dt_days * 86400.0;
  if (sc.schedule.steps < 1 || !(sc.schedule.dt > 0.0)) throw ConfigError("schedule needs steps >= 1 and dt > 0");
  for (Index g : sc.grids)
    if (g < 4 || g % 2 != 0) throw ConfigError("grid sizes must be even and at least 4");
  for (double f : sc.friction_sweep)
    if (!(f >= 0.0)) throw ConfigError("friction must be nonnegative");
  for (double k : sc.stiffness_sweep)
    if (!(k >= 0.0)) throw ConfigError("normal_stiffness must be nonnegative");
  return sc;
}

ToyModel build_model(const Scenario& sc, Index grid, double friction, double stiffness) {
  MaterialParams p = sc.params;
  p.contact.friction = friction;
  p.contact.normal_stiffness = stiffness;
  return ToyModel(build_grid(grid, grid, sc.fractured), p, sc.bc);
}

RunReport run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  const Scenario sc = resolve_scenario(cfg);
  SolverOpts opts = default_solver_opts(cfg.variant);
  if (cfg.rel_tol) opts.rel_tol = *cfg.rel_tol;
  if (cfg.abs_tol) opts.abs_tol = *cfg.abs_tol;
  if (cfg.restart) opts.restart = *cfg.restart;
  if (cfg.max_iters) opts.max_iters = *cfg.max_iters;
  try {
    opts.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.max_newton < 1) throw ConfigError("max_newton must be at least 1");
  NewtonOptions nopts;
  nopts.max_newton = cfg.max_newton;

  RunReport report;
  report.config = cfg;
  for (Index g : sc.grids)
    for (double f : sc.friction_sweep)
      for (double k : sc.stiffness_sweep) {
        RunPoint p;
        p.grid = g;
        p.friction = f;
        p.stiffness = k;
        report.points.push_back(p);
      }

  const LinearSolver solver = make_linear_solver(cfg.variant, opts);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < report.points.size(); i = next++) {
      RunPoint& p = report.points[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const ToyModel model = build_model(sc, p.grid, p.friction, p.stiffness);
        p.dofs = model.layout().total();
        p.steps = simulate(model, sc.schedule, solver, nopts).steps;
      } catch (const std::invalid_argument& e) {
        p.ok = false;
        p.error = e.what();
      } catch (const std::runtime_error& e) {
        p.ok = false;
        p.error = e.what();
      }
      p.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(report.points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

unsigned thread_cap() {
  if (const char* env = std::getenv("FCPM_THREADS")) {
    const std::string s(env);
    unsigned v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
    throw ConfigError("FCPM_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- output

namespace {

nlohmann::json counts_json(const ContactCounts& c) {
  return {{"open", c.open}, {"stick", c.stick}, {"slide", c.slide}};
}

nlohmann::json solve_json(const SolveReport& r) {
  return {{"iterations", r.iterations},
          {"converged", r.converged},
          {"stop_reason", std::string(to_string(r.stop_reason))},
          {"residual_history", r.residual_history}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

nlohmann::json to_json(const RunReport& r) {
  using nlohmann::json;
  const auto& c = r.config;
  json cfg = {{"scenario", c.scenario}, {"variant", std::string(to_string(c.variant))}, {"max_newton", c.max_newton}};
  if (!c.grids.empty()) cfg["grids"] = c.grids;
  if (!c.friction.empty()) cfg["friction"] = c.friction;
  if (!c.stiffness.empty()) cfg["normal_stiffness"] = c.stiffness;
  if (c.rel_tol) cfg["rel_tol"] = *c.rel_tol;
  if (c.abs_tol) cfg["abs_tol"] = *c.abs_tol;
  if (c.restart) cfg["restart"] = *c.restart;
  if (c.max_iters) cfg["max_iters"] = *c.max_iters;
  if (c.east_pressure_factor) cfg["east_pressure_factor"] = *c.east_pressure_factor;
  if (c.steps) cfg["steps"] = *c.steps;
  if (c.dt_days) cfg["dt_days"] = *c.dt_days;

  json points = json::array();
  for (const auto& p : r.points) {
    json steps = json::array();
    for (const auto& s : p.steps) {
      json its = json::array();
      for (const auto& it : s.newton.iterations)
        its.push_back({{"residual", it.residual_norm}, {"contact", counts_json(it.contact)}, {"linear", solve_json(it.linear)}});
      steps.push_back({{"time", s.time},
                       {"converged", s.newton.converged},
                       {"final_residual", s.newton.final_residual},
                       {"final_contact", counts_json(s.newton.final_contact)},
                       {"newton", its}});
    }
    points.push_back({{"grid", p.grid},
                      {"friction", p.friction},
                      {"normal_stiffness", p.stiffness},
                      {"dofs", p.dofs},
                      {"ok", p.ok},
                      {"error", p.error},
                      {"newton_iterations", p.newton_iterations()},
                      {"linear_iterations", p.linear_iterations()},
                      {"avg_linear_iters", p.avg_linear_iters()},
                      {"avg_newton_iters", p.avg_newton_iters()},
                      {"steps", steps}});
  }
  return {{"schema", "fcpm-report-1"}, {"config", cfg}, {"points", points}};
}

void write_summary_csv(const RunReport& r, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "grid,variant,F,K_n,avg_linear_iters,avg_newton_iters,wall_time_s\n";
  for (const auto& p : r.points)
    out << p.grid << ',' << to_string(r.config.variant) << ',' << fmt(p.friction) << ',' << fmt(p.stiffness) << ','
        << fmt(p.avg_linear_iters()) << ',' << fmt(p.avg_newton_iters()) << ',' << fmt(p.wall_time_s) << '\n';
}

void write_outputs(const RunReport& r) {
  std::filesystem::create_directories(r.config.out);
  std::ofstream js(r.config.out / "report.json");
  if (!js) throw std::runtime_error("cannot write " + (r.config.out / "report.json").string());
  js << to_json(r).dump(2) << '\n';
  write_summary_csv(r, r.config.out / "summary.csv");
}

namespace {

nlohmann::json load_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open report " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != "fcpm-report-1" || !j.contains("points") || !j["points"].is_array())
    throw ParseError(file.string() + ": not an fcpm report");
  return j;
}

double rel_change(double a, double b) {
  if (a == b) return 0.0;
  return a != 0.0 ? (b - a) / std::abs(a) : std::numeric_limits<double>::infinity();
}

std::string compare_points(const nlohmann::json& ja, const nlohmann::json& jb, const nlohmann::json& pa,
                           const nlohmann::json& pb);

}  // namespace

std::string compare_reports(const std::filesystem::path& a, const std::filesystem::path& b) {
  const auto ja = load_report(a);
  const auto jb = load_report(b);
  const auto& pa = ja["points"];
  const auto& pb = jb["points"];
  try {
    return compare_points(ja, jb, pa, pb);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("incompatible reports: ") + e.what());
  }
}

namespace {

std::string compare_points(const nlohmann::json& ja, const nlohmann::json& jb, const nlohmann::json& pa,
                           const nlohmann::json& pb) {
  if (pa.size() != pb.size()) throw ParseError("reports have different numbers of sweep points");
  std::ostringstream out;
  out << "variant: " << ja["config"].value("variant", "?") << " -> " << jb["config"].value("variant", "?") << '\n';
  out << "grid  F         K_n         metric             a           b           rel_change\n";
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (const char* key : {"grid", "friction", "normal_stiffness"})
      if (pa[i].at(key) != pb[i].at(key)) throw ParseError("sweep point " + std::to_string(i) + " differs in " + key);
    for (const char* metric : {"avg_linear_iters", "avg_newton_iters"}) {
      const double va = pa[i].at(metric).get<double>();
      const double vb = pb[i].at(metric).get<double>();
      char line[160];
      std::snprintf(line, sizeof line, "%-5lld %-9.4g %-11.4g %-18s %-11.6g %-11.6g %+.4f\n",
                    static_cast<long long>(pa[i]["grid"].get<Index>()), pa[i]["friction"].get<double>(),
                    pa[i]["normal_stiffness"].get<double>(), metric, va, vb, rel_change(va, vb));
      out << line;
    }
  }
  return out.str();
}

}  // namespace

}  // namespace fcpm
