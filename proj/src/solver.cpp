#include "elfdesign/solver.hpp"

#include "elfdesign/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace elfdesign {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPruneWeight = 1e-6;

double default_merge_tol(const ModelSpec& m, const SolveOptions& o) {
  return o.merge_tol > 0.0 ? o.merge_tol : m.design_space().width() * 1e-4;
}

// Support points with cached per-point information matrices.
class WorkingDesign {
 public:
  WorkingDesign(const ModelSpec& m, const TargetVector& c, const Design& d) : m_(&m), c_(&c) {
    x_ = d.points();
    w_ = d.weights();
    for (double x : x_) info_.push_back(information_at(m, x));
  }

  std::size_t size() const { return x_.size(); }
  std::vector<double>& x() { return x_; }
  std::vector<double>& w() { return w_; }
  const std::vector<Eigen::MatrixXd>& info() const { return info_; }

  void set_point(std::size_t r, double x, Eigen::MatrixXd info) {
    x_[r] = x;
    info_[r] = std::move(info);
  }

  Eigen::MatrixXd moment(const std::vector<double>& w) const {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m_->p(), m_->p());
    for (std::size_t r = 0; r < x_.size(); ++r) sum += w[r] * info_[r];
    return sum;
  }

  // Criterion for the given weights with one point optionally replaced.
  double criterion(const std::vector<double>& w, std::optional<std::size_t> swap = std::nullopt,
                   const Eigen::MatrixXd* swap_info = nullptr) const {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m_->p(), m_->p());
    for (std::size_t r = 0; r < x_.size(); ++r)
      sum += w[r] * ((swap && *swap == r) ? *swap_info : info_[r]);
    InfoMatrix info(sum);
    if (!estimable(*c_, info)) return kInf;
    return c_->value().dot(pseudo_inverse(info).matrix * c_->value());
  }

  void drop_small(double threshold) {
    std::vector<double> x, w;
    std::vector<Eigen::MatrixXd> info;
    double total = 0.0;
    for (std::size_t r = 0; r < x_.size(); ++r) {
      if (w_[r] < threshold) continue;
      x.push_back(x_[r]);
      w.push_back(w_[r]);
      info.push_back(info_[r]);
      total += w_[r];
    }
    for (double& v : w) v /= total;
    x_ = std::move(x);
    w_ = std::move(w);
    info_ = std::move(info);
  }

  Design to_design(double merge_tol) const { return Design::normalized(x_, w_, merge_tol); }

 private:
  const ModelSpec* m_;
  const TargetVector* c_;
  std::vector<double> x_;
  std::vector<double> w_;
  std::vector<Eigen::MatrixXd> info_;
};

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(const std::vector<double>& v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, tau = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - tau);
  double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& x : out) x /= s;
  return out;
}

// Gradient of c'M(w)+c in the weights: -(M+c)' I_r (M+c), with one-sided
// finite differences on the coordinates whose weight is zero when the
// current matrix has lost rank.
std::vector<double> weight_gradient(const WorkingDesign& wd, const std::vector<double>& w,
                                    const TargetVector& c, int full_rank, double h0) {
  InfoMatrix info(wd.moment(w));
  Eigen::VectorXd a = pseudo_inverse(info).matrix * c.value();
  std::vector<double> g(wd.size());
  for (std::size_t r = 0; r < wd.size(); ++r) g[r] = -a.dot(wd.info()[r] * a);
  if (info.rank() < full_rank) {
    const double delta = 1e-7;
    for (std::size_t r = 0; r < wd.size(); ++r) {
      if (w[r] > 0.0) continue;
      std::vector<double> wp = w;
      wp[r] += delta;
      double hp = wd.criterion(wp);
      if (std::isfinite(hp)) g[r] = (hp - h0) / delta;
    }
  }
  return g;
}

void weight_step(WorkingDesign& wd, const TargetVector& c) {
  const std::size_t m = wd.size();
  if (m == 1) {
    wd.w()[0] = 1.0;
    return;
  }
  std::vector<double> uniform(m, 1.0 / m);
  const int full_rank = InfoMatrix(wd.moment(uniform)).rank();

  std::vector<double> w = wd.w();
  double h = wd.criterion(w);
  if (!std::isfinite(h)) return;
  std::vector<double> g = weight_gradient(wd, w, c, full_rank, h);
  double step = -1.0;
  std::vector<double> w_prev, g_prev;

  for (int it = 0; it < 5000; ++it) {
    if (!w_prev.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        double s = w[r] - w_prev[r], y = g[r] - g_prev[r];
        ss += s * s;
        sy += s * y;
      }
      step = sy > 0.0 ? ss / sy : -1.0;
    }
    if (step <= 0.0) {
      double gn = 0.0;
      for (double v : g) gn = std::max(gn, std::abs(v));
      step = gn > 0.0 ? 0.1 / gn : 1.0;
    }

    std::vector<double> trial;
    double h_trial = kInf;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<double> v(m);
      for (std::size_t r = 0; r < m; ++r) v[r] = w[r] - step * g[r];
      trial = project_simplex(v);
      double decrease = 0.0;
      for (std::size_t r = 0; r < m; ++r) decrease += g[r] * (trial[r] - w[r]);
      h_trial = wd.criterion(trial);
      if (std::isfinite(h_trial) && h_trial <= h + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    double move = 0.0;
    for (std::size_t r = 0; r < m; ++r) move = std::max(move, std::abs(trial[r] - w[r]));
    w_prev = w;
    g_prev = g;
    w = trial;
    double improvement = h - h_trial;
    h = h_trial;
    if (move < 1e-14 || improvement <= 1e-16 * std::abs(h)) break;
    g = weight_gradient(wd, w, c, full_rank, h);
  }
  wd.w() = w;
}

// Golden-section search for one support point inside [lo, hi].
void point_step(WorkingDesign& wd, const ModelSpec& m, std::size_t r, double half_width) {
  const Interval& ds = m.design_space();
  double lo = std::max(ds.lo, wd.x()[r] - half_width);
  double hi = std::min(ds.hi, wd.x()[r] + half_width);
  auto eval = [&](double x, Eigen::MatrixXd& info) {
    try {
      info = information_at(m, x);
    } catch (const DomainError&) {
      return kInf;
    }
    return wd.criterion(wd.w(), r, &info);
  };

  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  Eigen::MatrixXd info_a, info_b;
  double a = hi - invphi * (hi - lo);
  double b = lo + invphi * (hi - lo);
  double fa = eval(a, info_a), fb = eval(b, info_b);
  for (int it = 0; it < 80 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      info_b = info_a;
      a = hi - invphi * (hi - lo);
      fa = eval(a, info_a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      info_a = info_b;
      b = lo + invphi * (hi - lo);
      fb = eval(b, info_b);
    }
  }
  // Candidates: interior optimum and both bracket ends (optima on the
  // boundary of the design space are common).
  double best_x = wd.x()[r];
  double best_f = wd.criterion(wd.w());
  Eigen::MatrixXd best_info = wd.info()[r];
  auto consider = [&](double x) {
    Eigen::MatrixXd info;
    double f = eval(x, info);
    if (f < best_f) {
      best_f = f;
      best_x = x;
      best_info = std::move(info);
    }
  };
  consider(0.5 * (a + b));
  consider(std::max(ds.lo, wd.x()[r] - half_width));
  consider(std::min(ds.hi, wd.x()[r] + half_width));
  if (best_x != wd.x()[r]) wd.set_point(r, best_x, std::move(best_info));
}

}  // namespace

Design optimize_weights(const ModelSpec& m, const Design& start, const TargetVector& c) {
  WorkingDesign wd(m, c, start);
  if (!std::isfinite(wd.criterion(wd.w())))
    throw NotEstimableError("optimize_weights: c'theta is not estimable under the start design");
  weight_step(wd, c);
  std::vector<double> x = wd.x(), w = wd.w();
  return Design::normalized(x, w, 0.0);
}

Design refine(const ModelSpec& m, const Design& start, const TargetVector& c,
              const SolveOptions& options) {
  const double merge_tol = default_merge_tol(m, options);
  const double half_width =
      std::max(4.0 * m.design_space().width() / std::max(2, options.n_x - 1), 10.0 * merge_tol);

  Design current = start;
  double h = criterion(m, current, c);
  for (int outer = 0; outer < 200; ++outer) {
    WorkingDesign wd(m, c, current);
    weight_step(wd, c);
    for (std::size_t r = 0; r < wd.size(); ++r) point_step(wd, m, r, half_width);
    weight_step(wd, c);

    WorkingDesign pruned = wd;
    pruned.drop_small(kPruneWeight);
    Design next;
    try {
      next = pruned.to_design(merge_tol);
    } catch (const ValidationError&) {
      break;
    }
    double h_next;
    try {
      h_next = criterion(m, next, c);
    } catch (const NotEstimableError&) {
      break;  // pruning lost estimability; keep the previous design
    }
    if (h_next > h) break;
    double improvement = h - h_next;
    current = std::move(next);
    h = h_next;
    if (improvement < 1e-10 * h) break;
  }
  return current;
}

namespace {

struct Finalized {
  std::vector<Eigen::VectorXd> eps;
  std::vector<Generator> exact;
};

// Boundary representation of a refined design: d = M+c / sqrt(c'M+c) and
// eps_r proportional to (d'f_l(x_r))_l.
Finalized exact_generators(const ModelSpec& m, const Design& d, const TargetVector& c) {
  SensitivityFunction phi(m, d, c);
  Eigen::VectorXd dvec = phi.direction() / std::sqrt(phi.criterion());
  Finalized out;
  for (double x : d.points()) {
    Eigen::VectorXd e = m.contributions(x).transpose() * dvec;
    double n = e.norm();
    if (!(n > 0.0)) {
      e = Eigen::VectorXd::Zero(m.k());
      e[0] = 1.0;
    } else {
      e /= n;
    }
    out.eps.push_back(e);
    out.exact.push_back(make_generator(m, x, e));
    out.exact.push_back(make_generator(m, x, -e));
  }
  return out;
}

}  // namespace

SolveResult solve(const ModelSpec& m, const TargetVector& c, const SolveOptions& options) {
  if (c.size() != m.p()) throw ValidationError("target vector length must equal p");
  if (options.max_rounds < 1 || options.tol <= 0.0)
    throw ValidationError("solve options: max_rounds and tol must be positive");
  const double merge_tol = default_merge_tol(m, options);

  std::vector<Generator> gens =
      generator_grid(m, options.n_x, options.n_eps, options.seed, options.threads).generators;

  std::optional<SolveResult> best;
  for (int round = 1; round <= options.max_rounds; ++round) {
    ElfvingRepresentation rep = max_scaling_lp(gens, c);
    Design d = refine(m, group_support(rep, merge_tol), c, options);

    VerifyOptions vopt;
    vopt.grid_n = options.verify_grid;
    vopt.tol = options.tol;
    vopt.threads = options.threads;
    OptimalityCertificate cert = verify_design(m, d, c, vopt);

    Finalized fin = exact_generators(m, d, c);
    std::vector<Generator> augmented = gens;
    augmented.insert(augmented.end(), fin.exact.begin(), fin.exact.end());
    ElfvingRepresentation final_rep = max_scaling_lp(augmented, c);
    std::string dual_source = "lp";

    // The LP dual only bounds d'g on the discrete eps directions, so it can
    // exceed 1 between them by up to 1/cos^2(pi/n_eps). M+c / (gamma c'M+c)
    // is the exact hyperplane whenever the design is optimal.
    auto vgrid = uniform_grid(m.design_space(), options.verify_grid);
    vgrid.insert(vgrid.end(), d.points().begin(), d.points().end());
    if (!hyperplane_certificate(m, final_rep.d, final_rep.gamma, c, vgrid, options.tol,
                                options.threads)
             .pass) {
      SensitivityFunction phi(m, d, c);
      Eigen::VectorXd dmp = phi.direction() / (final_rep.gamma * phi.criterion());
      if (hyperplane_certificate(m, dmp, final_rep.gamma, c, vgrid, options.tol, options.threads)
              .pass) {
        final_rep.d = dmp;
        dual_source = "sensitivity";
      }
    }

    vopt.gamma = final_rep.gamma;
    vopt.hyperplane = std::make_pair(final_rep.d, final_rep.gamma);
    cert = verify_design(m, d, c, vopt);

    SolveResult result;
    result.design = d;
    result.eps = fin.eps;
    result.criterion_value = cert.criterion;
    result.gamma = final_rep.gamma;
    result.certificate = cert;
    result.representation = final_rep;
    result.dual_source = dual_source;
    result.rounds_used = round;
    result.converged = cert.optimal;
    if (cert.optimal) return result;

    if (!best || result.criterion_value < best->criterion_value) best = result;

    // Cut: the most violated point with its best eps direction, plus the
    // current support with exact directions.
    SensitivityFunction phi(m, d, c);
    Eigen::VectorXd e = m.contributions(cert.argmax_x).transpose() * phi.direction();
    if (e.norm() > 0.0) {
      e /= e.norm();
      gens.push_back(make_generator(m, cert.argmax_x, e));
      gens.push_back(make_generator(m, cert.argmax_x, -e));
    }
    gens.insert(gens.end(), fin.exact.begin(), fin.exact.end());
  }
  best->converged = false;
  return *best;
}

// ---------------------------------------------------------------------------
// Targets

namespace {

void check_med(const ModelSpec& m, double effect) {
  if (std::holds_alternative<RandomEffectsModel>(m.family()))
    throw ValidationError("target.preset: med applies to fixed-effects mean models");
  if (m.p() < 2) throw ValidationError("target.preset: med needs at least 2 parameters");
  const auto& t = m.theta0();
  if (!(effect > 0.0) || !(effect < t[0]))
    throw ValidationError("target.E: need 0 < E < theta1 for the minimum effective dose");
}

void check_auc(const ModelSpec& m) {
  if (m.p() != 2) throw ValidationError("target.preset: auc needs exactly 2 parameters");
  if (m.theta0()[1] == 0.0) throw ValidationError("target.preset: auc needs theta2 != 0");
}

}  // namespace

TargetVector target_from_preset(const ModelSpec& m, const TargetPreset& preset) {
  const auto& t = m.theta0();
  const int p = m.p();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
  switch (preset.kind) {
    case TargetPreset::Kind::kMed: {
      check_med(m, preset.effect);
      double e = preset.effect, den = t[0] - e;
      c[0] = -e * t[1] / (den * den);
      c[1] = e / den;
      break;
    }
    case TargetPreset::Kind::kAuc:
      check_auc(m);
      c[0] = 1.0 / t[1];
      c[1] = -t[0] / (t[1] * t[1]);
      break;
    case TargetPreset::Kind::kSingle:
      if (preset.index < 1 || preset.index > p)
        throw ValidationError("target.index: must be in [1, " + std::to_string(p) + "]");
      c[preset.index - 1] = 1.0;
      break;
    case TargetPreset::Kind::kLinear:
      if (preset.v.size() != p)
        throw ValidationError("target.v: expected " + std::to_string(p) + " entries");
      c = preset.v;
      break;
  }
  return TargetVector(c);
}

double preset_value(const ModelSpec& m, const TargetPreset& preset) {
  const auto& t = m.theta0();
  switch (preset.kind) {
    case TargetPreset::Kind::kMed:
      check_med(m, preset.effect);
      return preset.effect * t[1] / (t[0] - preset.effect);
    case TargetPreset::Kind::kAuc: check_auc(m); return t[0] / t[1];
    default: throw ValidationError("preset_value: only med and auc define a functional value");
  }
}

}  // namespace elfdesign
