#include "elfdesign/cli.hpp"

#include "elfdesign/config.hpp"
#include "elfdesign/elfving.hpp"
#include "elfdesign/error.hpp"
#include "elfdesign/json_io.hpp"
#include "elfdesign/parallel.hpp"
#include "elfdesign/simulate.hpp"
#include "elfdesign/solver.hpp"
#include "elfdesign/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <ostream>

namespace elfdesign {
namespace {

struct Flags {
  std::string config;
  int threads = 0;
  std::string design;
  std::string output;
  std::string trace;
  std::string replications;

  std::optional<int> n_x, n_eps, max_rounds, verify_grid, grid_n, draws, n, reps, starts;
  std::optional<double> tol, merge_tol, h;
  std::optional<std::uint64_t> seed;
  std::vector<int> dims;
};

template <typename T>
void override_with(T& target, const std::optional<T>& value) {
  if (value) target = *value;
}

void positive(const char* flag, const std::optional<int>& v, int lo) {
  if (v && *v < lo)
    throw ValidationError(std::string(flag) + ": must be at least " + std::to_string(lo));
}

void positive(const char* flag, const std::optional<double>& v) {
  if (v && !(*v > 0.0)) throw ValidationError(std::string(flag) + ": must be positive");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError(path + ": cannot open file for writing");
  return f;
}

void emit(std::ostream& out, const std::string& path, const Json& j) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  auto f = open_output(path);
  f << j.dump(2) << '\n';
}

void write_trace(const std::string& path, const ModelSpec& m, const Design& d,
                 const TargetVector& c, int grid_n, int threads) {
  auto f = open_output(path);
  f.precision(17);
  f << "x,phi\n";
  for (const auto& [x, phi] : sensitivity_trace(m, d, c, grid_n, threads))
    f << x << ',' << phi << '\n';
}

struct Loaded {
  Config config;
  ModelSpec model;
};

Loaded load(const Flags& f) {
  Config config = load_config(f.config);
  ModelSpec model = build_model(config.model);
  return {std::move(config), std::move(model)};
}

SolveOptions solve_options(const Config& config, const Flags& f, int threads) {
  SolveOptions o = config.solve;
  positive("--n-x", f.n_x, 2);
  positive("--n-eps", f.n_eps, 2);
  positive("--max-rounds", f.max_rounds, 1);
  positive("--verify-grid", f.verify_grid, 2);
  positive("--tol", f.tol);
  if (f.merge_tol && *f.merge_tol < 0.0)
    throw ValidationError("--merge-tol: must be non-negative");
  override_with(o.n_x, f.n_x);
  override_with(o.n_eps, f.n_eps);
  override_with(o.max_rounds, f.max_rounds);
  override_with(o.verify_grid, f.verify_grid);
  override_with(o.tol, f.tol);
  override_with(o.merge_tol, f.merge_tol);
  override_with(o.seed, f.seed);
  o.threads = threads;
  return o;
}

int cmd_solve(const Flags& f, std::ostream& out, int threads) {
  auto [config, model] = load(f);
  TargetVector c = resolve_target(config, model);
  SolveOptions opt = solve_options(config, f, threads);
  SolveResult r = solve(model, c, opt);
  emit(out, f.output, to_json(r));
  if (!f.trace.empty()) write_trace(f.trace, model, r.design, c, opt.verify_grid, threads);
  return r.converged ? 0 : 2;
}

int cmd_verify(const Flags& f, std::ostream& out, int threads) {
  auto [config, model] = load(f);
  TargetVector c = resolve_target(config, model);
  Design d = load_design(f.design);
  VerifyOptions opt;
  positive("--grid-n", f.grid_n, 2);
  positive("--tol", f.tol);
  opt.grid_n = f.grid_n.value_or(config.verify.grid_n);
  opt.tol = f.tol.value_or(config.verify.tol);
  opt.threads = threads;
  OptimalityCertificate cert = verify_design(model, d, c, opt);
  emit(out, f.output, to_json(cert));
  if (!f.trace.empty()) write_trace(f.trace, model, d, c, opt.grid_n, threads);
  return cert.optimal ? 0 : 2;
}

int cmd_elfving(const Flags& f, std::ostream& out, int threads) {
  auto [config, model] = load(f);
  TargetVector c = resolve_target(config, model);
  PlotConfig p = config.elfving;
  positive("--n-x", f.n_x, 2);
  positive("--n-eps", f.n_eps, 2);
  override_with(p.n_x, f.n_x);
  override_with(p.n_eps, f.n_eps);
  override_with(p.seed, f.seed);
  if (!f.dims.empty()) {
    if (f.dims.size() != 2 && f.dims.size() != 3)
      throw ValidationError("--dims: expected 2 or 3 coordinates");
    p.dims.clear();
    for (int d : f.dims) {
      if (d < 1) throw ValidationError("--dims: coordinates are 1-based");
      p.dims.push_back(d - 1);
    }
  }
  for (int d : p.dims)
    if (d >= model.p())
      throw ValidationError("elfving.dims: coordinate " + std::to_string(d + 1) +
                            " exceeds p = " + std::to_string(model.p()));
  PlotData plot = plot_boundary(model, p.dims, p.n_x, p.n_eps, c, p.seed, threads);
  if (f.output.empty()) {
    write_plot_csv(out, plot);
  } else {
    auto file = open_output(f.output);
    write_plot_csv(file, plot);
  }
  return 0;
}

int cmd_info(const Flags& f, std::ostream& out, int) {
  auto [config, model] = load(f);
  Design d = load_design(f.design);
  InfoMatrix info = information_matrix(model, d);
  Json j{{"design", to_json(d)},
         {"information_matrix", to_json(info.matrix())},
         {"eigenvalues", to_json(info.eigenvalues())},
         {"rank", info.rank()}};
  if (config.target) {
    TargetVector c = resolve_target(config, model);
    const bool ok = estimable(c, info);
    j["c"] = to_json(c.value());
    j["estimable"] = ok;
    j["criterion"] = ok ? Json(criterion(info, c)) : Json(nullptr);
  }
  emit(out, f.output, j);
  return 0;
}

int cmd_gradcheck(const Flags& f, std::ostream& out, int) {
  auto [config, model] = load(f);
  GradcheckConfig g = config.gradcheck;
  positive("--draws", f.draws, 1);
  positive("--step", f.h);
  override_with(g.draws, f.draws);
  override_with(g.seed, f.seed);
  override_with(g.h, f.h);
  ModelGradientCheck report = check_model_gradients(model, g.draws, g.seed, g.h);
  emit(out, f.output, to_json(report));
  return report.pass() ? 0 : 2;
}

int cmd_simulate(const Flags& f, std::ostream& out, int threads) {
  auto [config, model] = load(f);
  TargetVector c = resolve_target(config, model);
  SimulateConfig s = config.simulate;
  positive("--n", f.n, 1);
  positive("--reps", f.reps, 100);
  positive("--starts", f.starts, 1);
  override_with(s.n, f.n);
  override_with(s.reps, f.reps);
  override_with(s.seed, f.seed);
  override_with(s.starts, f.starts);

  Design d;
  if (!f.design.empty()) {
    d = load_design(f.design);
  } else {
    SolveOptions opt = config.solve;
    opt.threads = threads;
    d = solve(model, c, opt).design;
  }
  FitOptions fit;
  fit.starts = s.starts;
  CovarianceReport report = covariance_check(model, d, c, s.n, s.reps, s.seed, threads, fit);
  Json j = to_json(report);
  j["design"] = to_json(d);
  emit(out, f.output, j);
  if (!f.replications.empty()) {
    auto file = open_output(f.replications);
    write_replications_csv(file, report);
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Locally c-optimal designs via the generalized Elfving set"};
  app.name("elfdesign");
  app.require_subcommand(1, 1);

  Flags f;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file")->required()->check(
        CLI::ExistingFile);
    sub->add_option("--threads", f.threads, "worker threads, 0 for all cores")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--output,-o", f.output, "write the result to this file instead of stdout");
  };

  auto* solve_cmd = app.add_subcommand("solve", "compute a c-optimal design");
  common(solve_cmd);
  solve_cmd->add_option("--n-x", f.n_x, "design grid size");
  solve_cmd->add_option("--n-eps", f.n_eps, "eps directions per grid point");
  solve_cmd->add_option("--max-rounds", f.max_rounds, "cutting-plane rounds");
  solve_cmd->add_option("--tol", f.tol, "certificate tolerance");
  solve_cmd->add_option("--merge-tol", f.merge_tol, "support merge distance");
  solve_cmd->add_option("--seed", f.seed, "eps direction seed");
  solve_cmd->add_option("--verify-grid", f.verify_grid, "verification grid size");
  solve_cmd->add_option("--trace", f.trace, "write the sensitivity trace (x,phi) as CSV");

  auto* verify_cmd = app.add_subcommand("verify", "certify a design by the equivalence theorem");
  common(verify_cmd);
  verify_cmd->add_option("--design", f.design, "design JSON")->required()->check(
      CLI::ExistingFile);
  verify_cmd->add_option("--grid-n", f.grid_n, "verification grid size");
  verify_cmd->add_option("--tol", f.tol, "certificate tolerance");
  verify_cmd->add_option("--trace", f.trace, "write the sensitivity trace (x,phi) as CSV");

  auto* elfving_cmd = app.add_subcommand("elfving", "emit the Elfving set projection as CSV");
  common(elfving_cmd);
  elfving_cmd->add_option("--dims", f.dims, "1-based coordinates, e.g. 1,2")->delimiter(',');
  elfving_cmd->add_option("--n-x", f.n_x, "design grid size");
  elfving_cmd->add_option("--n-eps", f.n_eps, "eps directions per grid point");
  elfving_cmd->add_option("--seed", f.seed, "eps direction seed");

  auto* info_cmd = app.add_subcommand("info", "information matrix and criterion of a design");
  common(info_cmd);
  info_cmd->add_option("--design", f.design, "design JSON")->required()->check(CLI::ExistingFile);

  auto* grad_cmd = app.add_subcommand("gradcheck", "compare AD derivatives with finite differences");
  common(grad_cmd);
  grad_cmd->add_option("--draws", f.draws, "random (x, theta) draws");
  grad_cmd->add_option("--seed", f.seed, "random seed");
  grad_cmd->add_option("--step", f.h, "relative finite-difference step");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo covariance check of a design");
  common(sim_cmd);
  sim_cmd->add_option("--design", f.design, "design JSON; solved from the config when absent")
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--n", f.n, "observations per replication");
  sim_cmd->add_option("--reps", f.reps, "replications");
  sim_cmd->add_option("--seed", f.seed, "random seed");
  sim_cmd->add_option("--starts", f.starts, "fit starting points");
  sim_cmd->add_option("--replications", f.replications, "write per-replication estimates as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  const int threads = resolve_threads(f.threads);
  try {
    if (solve_cmd->parsed()) return cmd_solve(f, out, threads);
    if (verify_cmd->parsed()) return cmd_verify(f, out, threads);
    if (elfving_cmd->parsed()) return cmd_elfving(f, out, threads);
    if (info_cmd->parsed()) return cmd_info(f, out, threads);
    if (grad_cmd->parsed()) return cmd_gradcheck(f, out, threads);
    if (sim_cmd->parsed()) return cmd_simulate(f, out, threads);
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace elfdesign
