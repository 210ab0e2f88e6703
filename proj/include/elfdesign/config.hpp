#pragma once

#include "elfdesign/json_io.hpp"
#include "elfdesign/model.hpp"
#include "elfdesign/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace elfdesign {

/// Either a named preset or an explicit c vector.
using TargetSpec = std::variant<TargetPreset, Eigen::VectorXd>;

struct VerifyConfig {
  int grid_n = 10001;
  double tol = 1e-4;
};

struct SimulateConfig {
  int n = 200;
  int reps = 2000;
  std::uint64_t seed = 0;
  int starts = 4;
};

struct PlotConfig {
  std::vector<int> dims{0, 1};  // 0-based; written 1-based in files
  int n_x = 201;
  int n_eps = 64;
  std::uint64_t seed = 0;
};

struct GradcheckConfig {
  int draws = 100;
  std::uint64_t seed = 0;
  double h = 1e-5;
};

struct Config {
  ModelDescription model;
  std::optional<TargetSpec> target;
  SolveOptions solve;
  VerifyConfig verify;
  SimulateConfig simulate;
  PlotConfig elfving;
  GradcheckConfig gradcheck;
};

/// Strict parse: unknown keys, wrong types and family-inconsistent fields
/// are ValidationErrors whose message starts with the dotted path of the
/// offending field (e.g. "model.theta0").
Config parse_config(const Json& j);
Config load_config(const std::string& path);

/// c for the configured target; "target" errors when absent or when c has
/// the wrong length for the model.
TargetVector resolve_target(const Config& config, const ModelSpec& m);

}  // namespace elfdesign
