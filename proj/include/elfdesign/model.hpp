#pragma once

#include "elfdesign/expr.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace elfdesign {

/// Closed design interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Mean mu(x, theta) with parameter-dependent variance sigma^2(x, theta).
struct HeteroscedasticModel {
  Expression mean;
  Expression variance;
};

/// Population model y = f(x, b) + e with b ~ N(theta, omega), e ~ N(0, sigma2),
/// linearized around b = theta.
struct RandomEffectsModel {
  Expression mean;
  Eigen::MatrixXd omega;
  double sigma2 = 1.0;
};

/// Variance function of the mean, sigma^2 = link(mu).
class Link {
 public:
  enum class Kind { kPower, kExponential, kCustom };

  /// link(mu) = mu^q
  static Link power(double q);
  /// link(mu) = exp(q mu)
  static Link exponential(double q);
  /// Arbitrary link given as expressions in `mu` for the value and its derivative.
  static Link custom(const std::string& value, const std::string& derivative);

  Kind kind() const { return kind_; }
  double q() const { return q_; }

  double value(double mu) const;
  double derivative(double mu) const;

 private:
  Link() = default;

  Kind kind_ = Kind::kPower;
  double q_ = 1.0;
  std::optional<Expression> value_;
  std::optional<Expression> derivative_;
};

/// Mean with variance tied to it by a link. `reduced` selects the single
/// contribution vector form instead of the two-term form.
struct LinkFunctionModel {
  Expression mean;
  Link link;
  bool reduced = false;
};

using ModelFamily = std::variant<HeteroscedasticModel, RandomEffectsModel, LinkFunctionModel>;

/// Mean and variance of one observation at x together with their gradients
/// in theta.
struct Moments {
  double mean = 0.0;
  Eigen::VectorXd mean_grad;
  double variance = 0.0;
  Eigen::VectorXd variance_grad;
};

/// A validated model: p parameters, k contribution vectors per design point,
/// a design interval and the nominal parameter theta0.
class ModelSpec {
 public:
  /// Validates the family payload and checks variance positivity at theta0
  /// on a uniform grid over the design interval. Throws ValidationError.
  ModelSpec(ModelFamily family, Eigen::VectorXd theta0, Interval design_space);

  int p() const { return static_cast<int>(theta0_.size()); }
  int k() const { return k_; }
  const Interval& design_space() const { return design_space_; }
  const Eigen::VectorXd& theta0() const { return theta0_; }
  const ModelFamily& family() const { return family_; }

  /// p x k matrix whose columns are the contribution vectors f_1..f_k at (x, theta0).
  Eigen::MatrixXd contributions(double x) const { return contributions(x, theta0_); }
  Eigen::MatrixXd contributions(double x, const Eigen::VectorXd& theta) const;

  Moments moments(double x, const Eigen::VectorXd& theta) const;

  /// Named expressions of the model (mean, variance, ...) for diagnostics.
  std::vector<std::pair<std::string, Expression>> expressions() const;

 private:
  ModelFamily family_;
  Eigen::VectorXd theta0_;
  Interval design_space_;
  int k_ = 2;
};

/// Link description as it appears in a config file.
struct LinkDescription {
  std::string kind = "power";  // power | exponential | custom
  double q = 1.0;
  std::string value;       // custom only
  std::string derivative;  // custom only
};

/// Plain model description; build_model turns it into a ModelSpec.
struct ModelDescription {
  std::string family;  // heteroscedastic | random_effects | link
  std::string mean;
  std::string variance;  // heteroscedastic
  Eigen::MatrixXd omega;  // random_effects
  double sigma2 = 0.0;    // random_effects
  LinkDescription link;   // link
  bool reduced = false;   // link
  Eigen::VectorXd theta0;
  Interval design_space;
  std::optional<int> p;  // inferred from the expressions when absent
};

ModelSpec build_model(const ModelDescription& desc);

/// Linearized marginal variance grad_f' Omega grad_f + sigma2.
double re_variance(const RandomEffectsModel& m, double x, const Eigen::VectorXd& theta);

/// sqrt(1/l(mu) + (l'(mu)/l(mu))^2 / 2), the scale of the reduced contribution.
double link_weight(const LinkFunctionModel& m, double x, const Eigen::VectorXd& theta);

struct ModelGradientCheck {
  struct Entry {
    std::string name;
    double grad_error = 0.0;
    double hess_error = 0.0;
  };
  std::vector<Entry> entries;
  int draws = 0;
  /// Draws where an expression could not be evaluated.
  int skipped = 0;
  double grad_error = 0.0;
  double hess_error = 0.0;

  bool pass(double grad_tol = 1e-6, double hess_tol = 1e-4) const {
    return grad_error <= grad_tol && hess_error <= hess_tol;
  }
};

/// check_gradient on every model expression at `draws` random points with
/// x uniform on the design interval and theta = theta0 * (1 + 0.2 U(-1, 1)).
ModelGradientCheck check_model_gradients(const ModelSpec& m, int draws, std::uint64_t seed = 0,
                                         double h = 1e-5);

}  // namespace elfdesign
