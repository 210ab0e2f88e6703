#include "elfdesign/model.hpp"

#include "elfdesign/error.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace elfdesign {
namespace {

constexpr int kPositivityGrid = 1001;

int max_parameter_index(const Expression::Node& n) {
  int m = n.kind == Expression::Kind::kParameter ? n.index + 1 : 0;
  if (n.lhs) m = std::max(m, max_parameter_index(*n.lhs));
  if (n.rhs) m = std::max(m, max_parameter_index(*n.rhs));
  return m;
}

Expression parse_field(const std::string& field, const std::string& text, int p) {
  if (text.empty()) throw ValidationError(field + ": missing expression");
  try {
    return Expression::parse(text, p);
  } catch (const ParseError& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

int referenced_parameters(const std::string& field, const std::string& text) {
  if (text.empty()) return 0;
  try {
    return max_parameter_index(Expression::parse(text, kMaxParameters).root());
  } catch (const ParseError& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

const Expression& mean_of(const ModelFamily& family) {
  return std::visit([](const auto& m) -> const Expression& { return m.mean; }, family);
}

}  // namespace

// ---------------------------------------------------------------------------
// Link

Link Link::power(double q) {
  Link l;
  l.kind_ = Kind::kPower;
  l.q_ = q;
  return l;
}

Link Link::exponential(double q) {
  Link l;
  l.kind_ = Kind::kExponential;
  l.q_ = q;
  return l;
}

Link Link::custom(const std::string& value, const std::string& derivative) {
  Link l;
  l.kind_ = Kind::kCustom;
  l.value_ = Expression::parse(value, 0, "mu");
  l.derivative_ = Expression::parse(derivative, 0, "mu");
  return l;
}

double Link::value(double mu) const {
  switch (kind_) {
    case Kind::kPower:
      if (q_ == 0.0) return 1.0;
      if (mu < 0.0 && q_ != std::floor(q_))
        throw DomainError("power link with non-integer exponent at negative mean");
      return std::pow(mu, q_);
    case Kind::kExponential: return std::exp(q_ * mu);
    case Kind::kCustom: return value_->eval(mu, Eigen::VectorXd());
  }
  return 0.0;
}

double Link::derivative(double mu) const {
  switch (kind_) {
    case Kind::kPower:
      if (q_ == 0.0) return 0.0;
      if (q_ == 1.0) return 1.0;
      return q_ * std::pow(mu, q_ - 1.0);
    case Kind::kExponential: return q_ * std::exp(q_ * mu);
    case Kind::kCustom: return derivative_->eval(mu, Eigen::VectorXd());
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Family helpers

double re_variance(const RandomEffectsModel& m, double x, const Eigen::VectorXd& theta) {
  Eigen::VectorXd g = m.mean.eval_grad(x, theta).grad;
  return g.dot(m.omega * g) + m.sigma2;
}

double link_weight(const LinkFunctionModel& m, double x, const Eigen::VectorXd& theta) {
  double mu = m.mean.eval(x, theta);
  double l = m.link.value(mu);
  if (!(l > 0.0)) throw DomainError("nonpositive link value at x = " + std::to_string(x));
  double r = m.link.derivative(mu) / l;
  return std::sqrt(1.0 / l + 0.5 * r * r);
}

// ---------------------------------------------------------------------------
// ModelSpec

ModelSpec::ModelSpec(ModelFamily family, Eigen::VectorXd theta0, Interval design_space)
    : family_(std::move(family)), theta0_(std::move(theta0)), design_space_(design_space) {
  if (!(design_space_.lo < design_space_.hi) || !std::isfinite(design_space_.lo) ||
      !std::isfinite(design_space_.hi))
    throw ValidationError("model.design_space: need finite a < b");
  const int p = static_cast<int>(theta0_.size());
  if (p < 1) throw ValidationError("model.theta0: at least one parameter required");
  if (mean_of(family_).parameter_count() != p)
    throw ValidationError("model.theta0: length " + std::to_string(p) +
                          " does not match the parameter count " +
                          std::to_string(mean_of(family_).parameter_count()));

  if (auto* h = std::get_if<HeteroscedasticModel>(&family_)) {
    if (h->variance.parameter_count() != p)
      throw ValidationError("model.variance: parameter count mismatch");
    // A parameter-free variance contributes f_2 = 0; drop it.
    k_ = h->variance.depends_on_parameters() ? 2 : 1;
  } else if (auto* r = std::get_if<RandomEffectsModel>(&family_)) {
    if (r->omega.rows() != p || r->omega.cols() != p)
      throw ValidationError("model.omega: must be " + std::to_string(p) + "x" +
                            std::to_string(p));
    if ((r->omega - r->omega.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, r->omega.cwiseAbs().maxCoeff()))
      throw ValidationError("model.omega: must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r->omega);
    double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-12 * top)
      throw ValidationError("model.omega: must be positive semidefinite");
    if (!(r->sigma2 > 0.0)) throw ValidationError("model.sigma2: must be positive");
    k_ = 2;
  } else {
    k_ = std::get<LinkFunctionModel>(family_).reduced ? 1 : 2;
  }

  for (int i = 0; i < kPositivityGrid; ++i) {
    double x = design_space_.lo + design_space_.width() * i / (kPositivityGrid - 1);
    Moments mom;
    try {
      mom = moments(x, theta0_);
    } catch (const DomainError& e) {
      throw ValidationError(std::string("model: evaluation failed at theta0, x = ") +
                            std::to_string(x) + ": " + e.what());
    }
    if (!(mom.variance > 0.0))
      throw ValidationError("model: variance is not positive at theta0, x = " + std::to_string(x));
  }
}

Moments ModelSpec::moments(double x, const Eigen::VectorXd& theta) const {
  Moments out;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HeteroscedasticModel>) {
          Jet1 mu = m.mean.eval_grad(x, theta);
          Jet1 var = m.variance.eval_grad(x, theta);
          out.mean = mu.value;
          out.mean_grad = std::move(mu.grad);
          out.variance = var.value;
          out.variance_grad = std::move(var.grad);
        } else if constexpr (std::is_same_v<T, RandomEffectsModel>) {
          Jet2 f = m.mean.eval_jet(x, theta);
          Eigen::VectorXd og = m.omega * f.grad;
          out.mean = f.value;
          out.variance = f.grad.dot(og) + m.sigma2;
          // d/dt_j (g' Omega g) = 2 g' Omega H e_j
          out.variance_grad = 2.0 * f.hess * og;
          out.mean_grad = std::move(f.grad);
        } else {
          Jet1 mu = m.mean.eval_grad(x, theta);
          out.mean = mu.value;
          out.variance = m.link.value(mu.value);
          out.variance_grad = m.link.derivative(mu.value) * mu.grad;
          out.mean_grad = std::move(mu.grad);
        }
      },
      family_);
  return out;
}

Eigen::MatrixXd ModelSpec::contributions(double x, const Eigen::VectorXd& theta) const {
  const int p = this->p();
  Eigen::MatrixXd f(p, k_);
  if (auto* l = std::get_if<LinkFunctionModel>(&family_); l && l->reduced) {
    Jet1 mu = l->mean.eval_grad(x, theta);
    double lv = l->link.value(mu.value);
    if (!(lv > 0.0)) throw DomainError("nonpositive link value at x = " + std::to_string(x));
    double r = l->link.derivative(mu.value) / lv;
    f.col(0) = std::sqrt(1.0 / lv + 0.5 * r * r) * mu.grad;
    return f;
  }
  Moments mom = moments(x, theta);
  if (!(mom.variance > 0.0))
    throw DomainError("nonpositive variance at x = " + std::to_string(x));
  f.col(0) = mom.mean_grad / std::sqrt(mom.variance);
  if (k_ == 2) f.col(1) = mom.variance_grad / (std::sqrt(2.0) * mom.variance);
  return f;
}

std::vector<std::pair<std::string, Expression>> ModelSpec::expressions() const {
  std::vector<std::pair<std::string, Expression>> out;
  std::visit(
      [&](const auto& m) {
        out.emplace_back("mean", m.mean);
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, HeteroscedasticModel>)
          out.emplace_back("variance", m.variance);
      },
      family_);
  return out;
}

ModelSpec build_model(const ModelDescription& desc) {
  const bool hetero = desc.family == "heteroscedastic";
  const bool re = desc.family == "random_effects";
  const bool link = desc.family == "link";
  if (!hetero && !re && !link)
    throw ValidationError("model.family: expected heteroscedastic, random_effects or link, got '" +
                          desc.family + "'");

  int p = desc.p.value_or(0);
  if (!desc.p) {
    p = referenced_parameters("model.mean", desc.mean);
    if (hetero) p = std::max(p, referenced_parameters("model.variance", desc.variance));
  }
  if (p < 1 || p > kMaxParameters)
    throw ValidationError("model.p: parameter count must be in [1, " +
                          std::to_string(kMaxParameters) + "]");
  if (desc.theta0.size() != p)
    throw ValidationError("model.theta0: expected " + std::to_string(p) + " entries, got " +
                          std::to_string(desc.theta0.size()));

  Expression mean = parse_field("model.mean", desc.mean, p);
  ModelFamily family = [&]() -> ModelFamily {
    if (hetero) return HeteroscedasticModel{mean, parse_field("model.variance", desc.variance, p)};
    if (re) return RandomEffectsModel{mean, desc.omega, desc.sigma2};
    const LinkDescription& ld = desc.link;
    Link l = Link::power(1.0);
    if (ld.kind == "power") {
      l = Link::power(ld.q);
    } else if (ld.kind == "exponential") {
      l = Link::exponential(ld.q);
    } else if (ld.kind == "custom") {
      try {
        l = Link::custom(ld.value, ld.derivative);
      } catch (const ParseError& e) {
        throw ValidationError(std::string("model.link: ") + e.what());
      }
    } else {
      throw ValidationError("model.link.kind: expected power, exponential or custom, got '" +
                            ld.kind + "'");
    }
    return LinkFunctionModel{mean, l, desc.reduced};
  }();
  return ModelSpec(std::move(family), desc.theta0, desc.design_space);
}

ModelGradientCheck check_model_gradients(const ModelSpec& m, int draws, std::uint64_t seed,
                                         double h) {
  if (draws < 1) throw ValidationError("gradient check needs at least one draw");
  ModelGradientCheck out;
  out.draws = draws;
  auto exprs = m.expressions();
  for (const auto& [name, e] : exprs) out.entries.push_back({name, 0.0, 0.0});

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Interval& ds = m.design_space();
  for (int i = 0; i < draws; ++i) {
    double x = ds.lo + 0.5 * (unit(rng) + 1.0) * ds.width();
    Eigen::VectorXd theta = m.theta0();
    for (int l = 0; l < theta.size(); ++l) theta[l] *= 1.0 + 0.2 * unit(rng);
    for (std::size_t j = 0; j < exprs.size(); ++j) {
      try {
        GradientCheckReport r = check_gradient(exprs[j].second, x, theta, h);
        out.entries[j].grad_error = std::max(out.entries[j].grad_error, r.grad_error);
        out.entries[j].hess_error = std::max(out.entries[j].hess_error, r.hess_error);
      } catch (const DomainError&) {
        ++out.skipped;
      }
    }
  }
  for (const auto& e : out.entries) {
    out.grad_error = std::max(out.grad_error, e.grad_error);
    out.hess_error = std::max(out.hess_error, e.hess_error);
  }
  return out;
}

}  // namespace elfdesign
