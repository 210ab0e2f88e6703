#pragma once

#include "elfdesign/design.hpp"
#include "elfdesign/elfving.hpp"
#include "elfdesign/model.hpp"
#include "elfdesign/verify.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace elfdesign {

struct SolveOptions {
  int n_x = 401;
  int n_eps = 64;
  int max_rounds = 10;
  double tol = 1e-4;
  /// Support points closer than this are merged; 0 selects (b - a) * 1e-4.
  double merge_tol = 0.0;
  std::uint64_t seed = 0;
  int verify_grid = 10001;
  int threads = 1;
};

struct SolveResult {
  Design design;
  /// Unit eps coefficients of the boundary representation, per support point.
  std::vector<Eigen::VectorXd> eps;
  double criterion_value = 0.0;
  double gamma = 0.0;
  OptimalityCertificate certificate;
  ElfvingRepresentation representation;
  /// "lp" when representation.d is the LP dual, "sensitivity" when the LP
  /// dual failed the hyperplane check on the verification grid and was
  /// replaced by M+c / (gamma c'M+c).
  std::string dual_source = "lp";
  int rounds_used = 0;
  /// False when max_rounds ran out before the certificate passed; the
  /// result then holds the best design found.
  bool converged = false;
};

/// Locally c-optimal design: Elfving LP on a generator grid, continuous
/// refinement of the extracted design, equivalence-theorem verification and
/// cutting-plane rounds that add the most violated point to the grid.
SolveResult solve(const ModelSpec& m, const TargetVector& c, const SolveOptions& options = {});

/// Local improvement of a design: alternating projected-gradient weight
/// steps and golden-section point moves, then pruning of weights < 1e-6.
Design refine(const ModelSpec& m, const Design& start, const TargetVector& c,
              const SolveOptions& options = {});

/// Optimal weights for a fixed support (projected gradient on the simplex).
Design optimize_weights(const ModelSpec& m, const Design& start, const TargetVector& c);

/// Named target vectors.
struct TargetPreset {
  enum class Kind { kMed, kAuc, kSingle, kLinear };

  Kind kind = Kind::kSingle;
  double effect = 1.0;  // med: target response E
  int index = 1;        // single: 1-based parameter index
  Eigen::VectorXd v;    // linear

  static TargetPreset med(double effect) { return {Kind::kMed, effect, 1, {}}; }
  static TargetPreset auc() { return {Kind::kAuc, 1.0, 1, {}}; }
  static TargetPreset single(int index) { return {Kind::kSingle, 1.0, index, {}}; }
  static TargetPreset linear(Eigen::VectorXd v) { return {Kind::kLinear, 1.0, 1, std::move(v)}; }
};

/// Delta-method gradient of the preset functional at theta0:
///   med(E):    x_min = E t2 / (t1 - E)  ->  (-E t2/(t1-E)^2, E/(t1-E), 0, ...)
///   auc:       t1 / t2                  ->  (1/t2, -t1/t2^2)
///   single(i): e_i;  linear(v): v.
TargetVector target_from_preset(const ModelSpec& m, const TargetPreset& preset);

/// Value of the med / auc functional at theta0 (x_min or the AUC).
double preset_value(const ModelSpec& m, const TargetPreset& preset);

}  // namespace elfdesign
