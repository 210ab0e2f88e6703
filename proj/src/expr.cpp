#include "elfdesign/expr.hpp"

#include "elfdesign/error.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <type_traits>
#include <vector>

namespace elfdesign {
namespace {

using Node = Expression::Node;
using Kind = Expression::Kind;
using NodePtr = std::shared_ptr<const Node>;

// ---------------------------------------------------------------------------
// Forward-mode dual numbers. Dual<Dual<double>> carries exact second
// derivatives: outer.d[i].d[j] = d2/(dt_i dt_j).

template <typename T>
struct Dual {
  T v{};
  std::array<T, kMaxParameters> d{};
  int n = 0;
};

template <typename T>
struct IsDual : std::false_type {};
template <typename T>
struct IsDual<Dual<T>> : std::true_type {};

double primal(double a) { return a; }
template <typename T>
double primal(const Dual<T>& a) {
  return primal(a.v);
}

template <typename S>
S constant(double c, int n);

template <>
double constant<double>(double c, int) {
  return c;
}

template <typename S>
S constant(double c, int n) {
  S out;
  out.v = constant<decltype(out.v)>(c, n);
  out.n = n;
  for (int i = 0; i < n; ++i) out.d[i] = constant<decltype(out.v)>(0.0, n);
  return out;
}

template <typename T>
Dual<T> operator-(const Dual<T>& a) {
  Dual<T> r;
  r.n = a.n;
  r.v = -a.v;
  for (int i = 0; i < a.n; ++i) r.d[i] = -a.d[i];
  return r;
}

template <typename T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r;
  r.n = a.n;
  r.v = a.v + b.v;
  for (int i = 0; i < a.n; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}

template <typename T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r;
  r.n = a.n;
  r.v = a.v - b.v;
  for (int i = 0; i < a.n; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}

template <typename T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r;
  r.n = a.n;
  r.v = a.v * b.v;
  for (int i = 0; i < a.n; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}

template <typename T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r;
  r.n = a.n;
  r.v = a.v / b.v;
  for (int i = 0; i < a.n; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
  return r;
}

// Scalar chain rule: r = f(a), dr = f'(a) da.
template <typename T>
Dual<T> chain(const Dual<T>& a, const T& value, const T& slope) {
  Dual<T> r;
  r.n = a.n;
  r.v = value;
  for (int i = 0; i < a.n; ++i) r.d[i] = slope * a.d[i];
  return r;
}

double exp_of(double a) { return std::exp(a); }
double log_of(double a) { return std::log(a); }
double sqrt_of(double a) { return std::sqrt(a); }
double pow_of(double a, double q) { return std::pow(a, q); }

template <typename T>
Dual<T> exp_of(const Dual<T>& a) {
  T e = exp_of(a.v);
  return chain(a, e, e);
}

template <typename T>
Dual<T> log_of(const Dual<T>& a) {
  return chain(a, log_of(a.v), constant<T>(1.0, a.n) / a.v);
}

template <typename T>
Dual<T> sqrt_of(const Dual<T>& a) {
  T s = sqrt_of(a.v);
  return chain(a, s, constant<T>(0.5, a.n) / s);
}

template <typename T>
Dual<T> pow_of(const Dual<T>& a, double q) {
  if (q == 0.0) return constant<Dual<T>>(1.0, a.n);
  T slope = constant<T>(q, a.n) * pow_of(a.v, q - 1.0);
  return chain(a, pow_of(a.v, q), slope);
}

bool all_finite(double a) { return std::isfinite(a); }
template <typename T>
bool all_finite(const Dual<T>& a) {
  if (!all_finite(a.v)) return false;
  for (int i = 0; i < a.n; ++i)
    if (!all_finite(a.d[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Printing.

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void print(const Node& n, const std::string& var, std::string& out) {
  auto binary = [&](const char* op) {
    out += '(';
    print(*n.lhs, var, out);
    out += ' ';
    out += op;
    out += ' ';
    print(*n.rhs, var, out);
    out += ')';
  };
  auto func = [&](const char* name) {
    out += name;
    out += '(';
    print(*n.lhs, var, out);
    out += ')';
  };
  switch (n.kind) {
    case Kind::kNumber: out += format_number(n.number); break;
    case Kind::kVariable: out += var; break;
    case Kind::kParameter: out += 't' + std::to_string(n.index + 1); break;
    case Kind::kNegate:
      out += "(-";
      print(*n.lhs, var, out);
      out += ')';
      break;
    case Kind::kAdd: binary("+"); break;
    case Kind::kSubtract: binary("-"); break;
    case Kind::kMultiply: binary("*"); break;
    case Kind::kDivide: binary("/"); break;
    case Kind::kPower: binary("^"); break;
    case Kind::kExp: func("exp"); break;
    case Kind::kLog: func("log"); break;
    case Kind::kSqrt: func("sqrt"); break;
  }
}

std::string node_string(const Node& n, const std::string& var) {
  std::string s;
  print(n, var, s);
  return s;
}

bool depends(const Node& n, Kind leaf) {
  if (n.kind == leaf) return true;
  if (n.lhs && depends(*n.lhs, leaf)) return true;
  if (n.rhs && depends(*n.rhs, leaf)) return true;
  return false;
}

bool same_tree(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Kind::kNumber && a.number != b.number) return false;
  if (a.kind == Kind::kParameter && a.index != b.index) return false;
  if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
  if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
  if (a.lhs && !same_tree(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !same_tree(*a.rhs, *b.rhs)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Parser.

class Parser {
 public:
  Parser(std::string_view text, int p, std::string_view var) : text_(text), p_(p), var_(var) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  static NodePtr make(Kind k, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = make(Kind::kAdd, lhs, parse_term());
      else if (accept('-'))
        lhs = make(Kind::kSubtract, lhs, parse_term());
      else
        return lhs;
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = make(Kind::kMultiply, lhs, parse_unary());
      else if (accept('/'))
        lhs = make(Kind::kDivide, lhs, parse_unary());
      else
        return lhs;
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make(Kind::kNegate, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    skip_ws();
    std::size_t caret = pos_;
    if (accept('^')) {
      NodePtr exponent = parse_unary();
      if (depends(*exponent, Kind::kVariable) || depends(*exponent, Kind::kParameter))
        throw ParseError("exponent of '^' must be constant", caret);
      return make(Kind::kPower, base, exponent);
    }
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    std::size_t start = pos_;
    auto is_digit = [&](std::size_t i) {
      return i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]));
    };
    while (is_digit(pos_)) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (is_digit(pos_)) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (!is_digit(pos_)) {
        pos_ = save;
      } else {
        while (is_digit(pos_)) ++pos_;
      }
    }
    double value = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_)
      throw ParseError("malformed number '" + std::string(text_.substr(start, pos_ - start)) + "'",
                       start);
    auto n = std::make_shared<Node>();
    n->kind = Kind::kNumber;
    n->number = value;
    return n;
  }

  NodePtr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);

    if (name == var_) return make(Kind::kVariable);

    if (name == "exp" || name == "log" || name == "sqrt") {
      if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
      NodePtr arg = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      Kind k = name == "exp" ? Kind::kExp : name == "log" ? Kind::kLog : Kind::kSqrt;
      return make(k, arg);
    }

    if (name.size() >= 2 && name[0] == 't') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i)
        digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
      if (digits) {
        int index = 0;
        auto res = std::from_chars(name.data() + 1, name.data() + name.size(), index);
        if (res.ec != std::errc() || index < 1 || index > p_)
          throw ParseError("parameter index out of range: " + std::string(name) + " (p = " +
                               std::to_string(p_) + ")",
                           start);
        auto n = std::make_shared<Node>();
        n->kind = Kind::kParameter;
        n->index = index - 1;
        return n;
      }
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  int p_;
  std::string_view var_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation, generic over double / Dual<double> / Dual<Dual<double>>.

template <typename S>
class Evaluator {
 public:
  Evaluator(double x, const std::vector<S>& params, const std::string& var, int n)
      : x_(x), params_(params), var_(var), n_(n) {}

  S eval(const Node& node) const {
    switch (node.kind) {
      case Kind::kNumber: return constant<S>(node.number, n_);
      case Kind::kVariable: return constant<S>(x_, n_);
      case Kind::kParameter: return params_[node.index];
      case Kind::kNegate: return -eval(*node.lhs);
      case Kind::kAdd: return eval(*node.lhs) + eval(*node.rhs);
      case Kind::kSubtract: return eval(*node.lhs) - eval(*node.rhs);
      case Kind::kMultiply: return eval(*node.lhs) * eval(*node.rhs);
      case Kind::kDivide: {
        S den = eval(*node.rhs);
        if (primal(den) == 0.0) fail("division by zero", node);
        return eval(*node.lhs) / den;
      }
      case Kind::kPower: {
        S base = eval(*node.lhs);
        double q = Evaluator<double>(x_, {}, var_, 0).eval(*node.rhs);
        double b = primal(base);
        if (b < 0.0 && q != std::floor(q)) fail("negative base with non-integer exponent", node);
        if (b == 0.0 && q < 0.0) fail("zero raised to a negative power", node);
        return pow_of(base, q);
      }
      case Kind::kExp: return exp_of(eval(*node.lhs));
      case Kind::kLog: {
        S a = eval(*node.lhs);
        if (primal(a) <= 0.0) fail("log of non-positive value", node);
        return log_of(a);
      }
      case Kind::kSqrt: {
        S a = eval(*node.lhs);
        double v = primal(a);
        if (v < 0.0) fail("sqrt of negative value", node);
        if (v == 0.0 && IsDual<S>::value) fail("sqrt is not differentiable at 0", node);
        return sqrt_of(a);
      }
    }
    return constant<S>(0.0, n_);
  }

 private:
  [[noreturn]] void fail(const std::string& what, const Node& node) const {
    throw DomainError(what + " in " + node_string(node, var_));
  }

  double x_;
  std::vector<S> params_;
  const std::string& var_;
  int n_;
};

void check_theta(const Expression& e, const Eigen::VectorXd& theta) {
  if (theta.size() != e.parameter_count())
    throw ValidationError("parameter vector has length " + std::to_string(theta.size()) +
                          ", expected " + std::to_string(e.parameter_count()));
}

}  // namespace

Expression Expression::parse(std::string_view text, int parameter_count, std::string_view variable) {
  if (parameter_count < 0 || parameter_count > kMaxParameters)
    throw ValidationError("parameter count must be in [0, " + std::to_string(kMaxParameters) + "]");
  Parser parser(text, parameter_count, variable);
  return Expression(parser.parse(), parameter_count, std::string(variable));
}

bool Expression::depends_on_parameters() const { return depends(*root_, Kind::kParameter); }
bool Expression::depends_on_variable() const { return depends(*root_, Kind::kVariable); }

std::string Expression::to_string() const { return node_string(*root_, variable_); }

bool operator==(const Expression& a, const Expression& b) {
  return a.parameter_count_ == b.parameter_count_ && same_tree(*a.root_, *b.root_);
}

double Expression::eval(double x, const Eigen::VectorXd& theta) const {
  check_theta(*this, theta);
  std::vector<double> params(theta.data(), theta.data() + theta.size());
  double v = Evaluator<double>(x, params, variable_, 0).eval(*root_);
  if (!std::isfinite(v)) throw DomainError("non-finite value of " + to_string());
  return v;
}

Jet1 Expression::eval_grad(double x, const Eigen::VectorXd& theta) const {
  check_theta(*this, theta);
  using D = Dual<double>;
  const int n = parameter_count_;
  std::vector<D> params(n);
  for (int i = 0; i < n; ++i) {
    params[i] = constant<D>(theta[i], n);
    params[i].d[i] = 1.0;
  }
  D r = Evaluator<D>(x, params, variable_, n).eval(*root_);
  if (!all_finite(r)) throw DomainError("non-finite value or derivative of " + to_string());
  Jet1 jet;
  jet.value = r.v;
  jet.grad.resize(n);
  for (int i = 0; i < n; ++i) jet.grad[i] = r.d[i];
  return jet;
}

Jet2 Expression::eval_jet(double x, const Eigen::VectorXd& theta) const {
  check_theta(*this, theta);
  using Inner = Dual<double>;
  using Outer = Dual<Inner>;
  const int n = parameter_count_;

  std::vector<Outer> params(n);
  for (int i = 0; i < n; ++i) {
    Outer& t = params[i];
    t = constant<Outer>(theta[i], n);
    t.v.d[i] = 1.0;
    t.d[i] = constant<Inner>(1.0, n);
  }
  Outer r = Evaluator<Outer>(x, params, variable_, n).eval(*root_);
  if (!all_finite(r)) throw DomainError("non-finite value or derivative of " + to_string());

  Jet2 jet;
  jet.value = r.v.v;
  jet.grad.resize(n);
  jet.hess.resize(n, n);
  for (int i = 0; i < n; ++i) {
    jet.grad[i] = r.v.d[i];
    for (int j = 0; j < n; ++j) jet.hess(i, j) = r.d[i].d[j];
  }
  jet.hess = 0.5 * (jet.hess + jet.hess.transpose()).eval();
  return jet;
}

GradientCheckReport check_gradient(const Expression& e, double x, const Eigen::VectorXd& theta,
                                   double h) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  const int n = e.parameter_count();
  Jet2 jet = e.eval_jet(x, theta);

  auto f = [&](const Eigen::VectorXd& t) { return e.eval(x, t); };
  Eigen::VectorXd fd_grad(n);
  Eigen::MatrixXd fd_hess(n, n);
  const double hh = 10.0 * h;
  const double f0 = jet.value;
  for (int i = 0; i < n; ++i) {
    double si = h * std::max(1.0, std::abs(theta[i]));
    Eigen::VectorXd tp = theta, tm = theta;
    tp[i] += si;
    tm[i] -= si;
    fd_grad[i] = (f(tp) - f(tm)) / (2.0 * si);

    double hi = hh * std::max(1.0, std::abs(theta[i]));
    tp = theta;
    tm = theta;
    tp[i] += hi;
    tm[i] -= hi;
    fd_hess(i, i) = (f(tp) - 2.0 * f0 + f(tm)) / (hi * hi);
    for (int j = 0; j < i; ++j) {
      double hj = hh * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd pp = theta, pm = theta, mp = theta, mm = theta;
      pp[i] += hi; pp[j] += hj;
      pm[i] += hi; pm[j] -= hj;
      mp[i] -= hi; mp[j] += hj;
      mm[i] -= hi; mm[j] -= hj;
      fd_hess(i, j) = fd_hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * hi * hj);
    }
  }

  // Errors are normwise and measured against the magnitude of the jet
  // itself, so exactly vanishing derivatives compare against rounding noise
  // on the scale of the value.
  GradientCheckReport report;
  if (n == 0) return report;
  double gscale = std::max(jet.grad.lpNorm<Eigen::Infinity>(), std::abs(f0));
  double hscale = std::max(jet.hess.lpNorm<Eigen::Infinity>(), gscale);
  double gdiff = (jet.grad - fd_grad).lpNorm<Eigen::Infinity>();
  double hdiff = (jet.hess - fd_hess).lpNorm<Eigen::Infinity>();
  report.grad_error = gscale > 0.0 ? gdiff / gscale : gdiff;
  report.hess_error = hscale > 0.0 ? hdiff / hscale : hdiff;
  return report;
}

}  // namespace elfdesign
