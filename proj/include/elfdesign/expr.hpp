#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <string_view>

namespace elfdesign {

/// Upper bound on the number of model parameters supported by the
/// forward-mode evaluator.
inline constexpr int kMaxParameters = 8;

/// Value, gradient and Hessian of a scalar expression with respect to the
/// parameter vector. `hess` is exactly symmetric.
struct Jet2 {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// Value and gradient only.
struct Jet1 {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Worst relative disagreement between forward-mode derivatives and central
/// finite differences.
struct GradientCheckReport {
  double grad_error = 0.0;
  double hess_error = 0.0;
};

/// Immutable expression tree over one design variable and parameters
/// t1..tp, built from numbers, + - * / ^, unary minus and exp/log/sqrt.
///
/// Grammar (whitespace ignored, `^` right-associative):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('-' | '+') unary | power
///     power   := primary ('^' unary)?
///     primary := number | variable | 't' index | func '(' expr ')' | '(' expr ')'
///
/// The exponent of `^` must not depend on the variable or the parameters.
/// Copies share the underlying tree and are cheap.
class Expression {
 public:
  enum class Kind {
    kNumber,
    kVariable,
    kParameter,
    kNegate,
    kAdd,
    kSubtract,
    kMultiply,
    kDivide,
    kPower,
    kExp,
    kLog,
    kSqrt,
  };

  struct Node {
    Kind kind;
    double number = 0.0;  // kNumber
    int index = 0;        // kParameter, 0-based
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  /// Parses `text` for a model with `parameter_count` parameters. The design
  /// variable is spelled `variable` (`x` for model expressions, `mu` for
  /// link functions).
  static Expression parse(std::string_view text, int parameter_count,
                          std::string_view variable = "x");

  int parameter_count() const { return parameter_count_; }
  const std::string& variable_name() const { return variable_; }
  const Node& root() const { return *root_; }

  bool depends_on_parameters() const;
  bool depends_on_variable() const;

  /// Fully parenthesized canonical form; parse(to_string()) reproduces the tree.
  std::string to_string() const;

  double eval(double x, const Eigen::VectorXd& theta) const;
  Jet1 eval_grad(double x, const Eigen::VectorXd& theta) const;
  Jet2 eval_jet(double x, const Eigen::VectorXd& theta) const;

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  Expression(std::shared_ptr<const Node> root, int parameter_count, std::string variable)
      : root_(std::move(root)), parameter_count_(parameter_count), variable_(std::move(variable)) {}

  std::shared_ptr<const Node> root_;
  int parameter_count_ = 0;
  std::string variable_;
};

/// Compares eval_jet against central differences with relative step `h`
/// (the Hessian uses value-based second differences with step 10h).
GradientCheckReport check_gradient(const Expression& e, double x, const Eigen::VectorXd& theta,
                                   double h = 1e-5);

}  // namespace elfdesign
