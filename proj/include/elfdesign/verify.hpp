#pragma once

#include "elfdesign/design.hpp"
#include "elfdesign/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace elfdesign {

/// Sensitivity function phi(x) = sum_l (c'M+ f_l(x))^2 / c'M+ c of a design.
/// Construction computes M+ once; evaluation is pure.
class SensitivityFunction {
 public:
  SensitivityFunction(const ModelSpec& m, const Design& d, const TargetVector& c);

  double operator()(double x) const;
  double criterion() const { return criterion_; }
  /// M+ c
  const Eigen::VectorXd& direction() const { return a_; }

 private:
  const ModelSpec* model_;
  Eigen::VectorXd a_;
  double criterion_ = 0.0;
};

double sensitivity(const ModelSpec& m, const Design& d, const TargetVector& c, double x);

/// (x, phi(x)) on a uniform grid of grid_n points over the design space.
std::vector<std::pair<double, double>> sensitivity_trace(const ModelSpec& m, const Design& d,
                                                         const TargetVector& c, int grid_n,
                                                         int threads = 1);

/// Uniform grid of n points over the design interval, endpoints included.
std::vector<double> uniform_grid(const Interval& ds, int n);

struct HyperplaneCheck {
  bool pass = false;
  /// gamma c'd, which must equal 1.
  double gamma_c_d = 0.0;
  /// sup over the grid of sum_l (d'f_l(x))^2
  double max_value = 0.0;
  double argmax_x = 0.0;
};

/// Supporting-hyperplane certificate: gamma c'd = 1 (within 1e-8) and
/// sum_l (d'f_l(x))^2 <= 1 + tol on the grid.
HyperplaneCheck hyperplane_certificate(const ModelSpec& m, const Eigen::VectorXd& d, double gamma,
                                       const TargetVector& c, const std::vector<double>& grid,
                                       double tol = 1e-4, int threads = 1);

struct OptimalityCertificate {
  double criterion = 0.0;
  double max_sensitivity = 0.0;
  double argmax_x = 0.0;
  std::vector<double> support_residuals;
  /// max(0, 2 - max_sensitivity)
  double efficiency_lower_bound = 0.0;
  /// |gamma^2 criterion - 1| when a gamma was supplied.
  std::optional<double> duality_gap;
  int grid_size = 0;
  double tol = 1e-4;
  /// max_sensitivity <= 1 + tol and every support residual <= tol.
  bool pass = false;
  std::optional<HyperplaneCheck> hyperplane;
  /// Verdict: pass, or the hyperplane certificate passed when pass failed.
  bool optimal = false;
  std::string note;
};

struct VerifyOptions {
  int grid_n = 10001;
  double tol = 1e-4;
  int threads = 1;
  std::optional<double> gamma;
  /// Supporting hyperplane (d, gamma) to try when the Moore-Penrose check fails.
  std::optional<std::pair<Eigen::VectorXd, double>> hyperplane;
};

/// Evaluates phi on the uniform grid plus the support points and fills the
/// certificate. Throws NotEstimableError when c is not estimable.
OptimalityCertificate verify_design(const ModelSpec& m, const Design& d, const TargetVector& c,
                                    const VerifyOptions& options = {});

}  // namespace elfdesign
