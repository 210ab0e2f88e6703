#include "elfdesign/simulate.hpp"

#include "elfdesign/error.hpp"
#include "elfdesign/parallel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

namespace elfdesign {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-point sufficient statistics: count, mean and centered sum of squares.
// Centering keeps the residual sum of squares exact when the noise is tiny
// relative to the response.
struct PointStats {
  double x;
  double n;
  double mean;
  double centered_ss;
};

std::vector<PointStats> point_stats(const DataSet& data) {
  std::vector<PointStats> out;
  std::size_t at = 0;
  for (std::size_t j = 0; j < data.points.size(); ++j) {
    PointStats s{data.points[j], static_cast<double>(data.counts[j]), 0.0, 0.0};
    const std::size_t begin = at;
    for (int i = 0; i < data.counts[j]; ++i, ++at) s.mean += data.y[at];
    if (data.counts[j] > 0) s.mean /= s.n;
    for (std::size_t i = begin; i < at; ++i) s.centered_ss += (data.y[i] - s.mean) * (data.y[i] - s.mean);
    out.push_back(s);
  }
  return out;
}

struct Evaluation {
  double ll = kNegInf;
  Eigen::VectorXd score;
  Eigen::MatrixXd fisher;
};

double residual_ss(const PointStats& s, double mu) {
  const double e = s.mean - mu;
  return s.centered_ss + s.n * e * e;
}

// With `fixed_variance`, the variance at each point is held at the given
// value and only the mean part of the likelihood is evaluated (weighted
// least squares).
Evaluation evaluate(const ModelSpec& m, const std::vector<PointStats>& stats,
                    const Eigen::VectorXd& theta, bool derivatives,
                    const std::vector<double>* fixed_variance = nullptr) {
  Evaluation ev;
  const int p = m.p();
  double ll = 0.0;
  if (derivatives) {
    ev.score = Eigen::VectorXd::Zero(p);
    ev.fisher = Eigen::MatrixXd::Zero(p, p);
  }
  try {
    for (std::size_t j = 0; j < stats.size(); ++j) {
      const PointStats& s = stats[j];
      Moments mo = m.moments(s.x, theta);
      const double v = fixed_variance ? (*fixed_variance)[j] : mo.variance;
      if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(mo.mean)) return ev;
      const double ss = residual_ss(s, mo.mean);
      if (fixed_variance) {
        ll += -0.5 * ss / v;
        if (derivatives) {
          ev.score += (s.n * (s.mean - mo.mean) / v) * mo.mean_grad;
          ev.fisher += (s.n / v) * mo.mean_grad * mo.mean_grad.transpose();
        }
        continue;
      }
      ll += -0.5 * s.n * std::log(2.0 * std::numbers::pi * v) - 0.5 * ss / v;
      if (derivatives) {
        const double r = s.n * (s.mean - mo.mean);
        ev.score += (r / v) * mo.mean_grad + 0.5 * (ss / (v * v) - s.n / v) * mo.variance_grad;
        ev.fisher += s.n * (mo.mean_grad * mo.mean_grad.transpose() / v +
                            mo.variance_grad * mo.variance_grad.transpose() / (2.0 * v * v));
      }
    }
  } catch (const DomainError&) {
    return ev;
  }
  if (!std::isfinite(ll)) return ev;
  ev.ll = ll;
  return ev;
}

Eigen::VectorXd project(Eigen::VectorXd theta, const FitOptions& opt) {
  if (opt.lower) theta = theta.cwiseMax(*opt.lower);
  if (opt.upper) theta = theta.cwiseMin(*opt.upper);
  return theta;
}

FitResult scoring(const ModelSpec& m, const std::vector<PointStats>& stats, Eigen::VectorXd theta,
                  const FitOptions& opt, const std::vector<double>* fixed_variance = nullptr) {
  FitResult res;
  theta = project(std::move(theta), opt);
  Evaluation cur = evaluate(m, stats, theta, true, fixed_variance);
  if (cur.ll == kNegInf) return res;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    // Levenberg damping keeps the step defined when the information is singular.
    Eigen::MatrixXd j = cur.fisher;
    const double ridge = 1e-12 * std::max(1.0, j.diagonal().cwiseAbs().maxCoeff());
    j.diagonal().array() += ridge;
    Eigen::VectorXd step = j.ldlt().solve(cur.score);
    if (!step.allFinite()) return res;
    const double decrement = cur.score.dot(step);
    if (decrement <= 1e-14 * std::max(1.0, std::abs(cur.ll))) {
      res.converged = true;
      break;
    }

    double t = 1.0;
    Evaluation next;
    Eigen::VectorXd cand;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      cand = project(theta + t * step, opt);
      next = evaluate(m, stats, cand, true, fixed_variance);
      if (next.ll != kNegInf &&
          next.ll >= cur.ll + 1e-4 * cur.score.dot(cand - theta)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent along the scoring direction: stationary up to rounding.
      res.converged = decrement <= 1e-8 * std::max(1.0, std::abs(cur.ll));
      break;
    }
    const double move = (cand - theta).cwiseAbs().maxCoeff();
    const double gain = next.ll - cur.ll;
    theta = cand;
    cur = std::move(next);
    if (move <= 1e-12 * std::max(1.0, theta.cwiseAbs().maxCoeff()) &&
        gain <= 1e-14 * std::max(1.0, std::abs(cur.ll))) {
      res.converged = true;
      break;
    }
  }
  res.theta = theta;
  res.log_likelihood = cur.ll;
  return res;
}

}  // namespace

std::vector<double> DataSet::x() const {
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t j = 0; j < points.size(); ++j) out.insert(out.end(), counts[j], points[j]);
  return out;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

DataSet simulate_responses(const ModelSpec& m, const Design& d, int n, std::uint64_t seed) {
  if (n < static_cast<int>(d.size()))
    throw ValidationError("simulate: N must be at least the number of support points");
  DataSet data;
  data.points = d.points();
  data.counts = apportion(d, n);
  data.theta = m.theta0();
  data.seed = seed;
  data.y.reserve(n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  if (const auto* re = std::get_if<RandomEffectsModel>(&m.family())) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(re->omega);
    Eigen::MatrixXd root =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const double sd = std::sqrt(re->sigma2);
    Eigen::VectorXd z(m.p());
    for (std::size_t j = 0; j < data.points.size(); ++j) {
      for (int i = 0; i < data.counts[j]; ++i) {
        for (int l = 0; l < m.p(); ++l) z[l] = normal(rng);
        Eigen::VectorXd b = m.theta0() + root * z;
        data.y.push_back(re->mean.eval(data.points[j], b) + sd * normal(rng));
      }
    }
    return data;
  }

  for (std::size_t j = 0; j < data.points.size(); ++j) {
    Moments mo = m.moments(data.points[j], m.theta0());
    const double sd = std::sqrt(mo.variance);
    for (int i = 0; i < data.counts[j]; ++i) data.y.push_back(mo.mean + sd * normal(rng));
  }
  return data;
}

double log_likelihood(const ModelSpec& m, const DataSet& data, const Eigen::VectorXd& theta) {
  return evaluate(m, point_stats(data), theta, false).ll;
}

FitResult fit_ml(const ModelSpec& m, const DataSet& data, const Eigen::VectorXd& theta_init,
                 const FitOptions& options) {
  if (theta_init.size() != m.p()) throw ValidationError("fit_ml: theta_init length must equal p");
  if (data.y.empty()) throw ValidationError("fit_ml: empty data set");
  auto stats = point_stats(data);

  std::mt19937_64 rng(stream_seed(options.seed, data.seed));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  FitResult best;
  best.log_likelihood = kNegInf;
  for (int s = 0; s < std::max(1, options.starts); ++s) {
    Eigen::VectorXd start = theta_init;
    if (s > 0)
      for (int l = 0; l < start.size(); ++l)
        start[l] += options.spread * unit(rng) * std::max(std::abs(theta_init[l]), 1e-3);
    // A poor start can make inflating the variance look better than moving
    // the mean, so the mean is first fitted by weighted least squares with
    // the variance frozen at the start.
    try {
      std::vector<double> v;
      for (const auto& s : stats) v.push_back(m.moments(s.x, project(start, options)).variance);
      FitResult ls = scoring(m, stats, start, options, &v);
      if (ls.theta.size() == start.size() && ls.theta.allFinite()) start = ls.theta;
    } catch (const DomainError&) {
    }
    FitResult r = scoring(m, stats, start, options);
    if (r.converged && r.log_likelihood > best.log_likelihood) best = r;
  }
  if (!best.converged) throw SolverError("fit_ml: no start converged");
  return best;
}

CovarianceReport covariance_check(const ModelSpec& m, const Design& d, const TargetVector& c,
                                  int n, int reps, std::uint64_t seed, int threads,
                                  const FitOptions& fit) {
  if (reps < 100) throw ValidationError("covariance_check: reps must be at least 100");
  if (c.size() != m.p()) throw ValidationError("covariance_check: c length must equal p");
  InfoMatrix info = information_matrix(m, d);
  if (!estimable(c, info)) throw NotEstimableError("c'theta is not estimable under this design");

  CovarianceReport rep;
  rep.n = n;
  rep.reps = reps;
  rep.seed = seed;
  rep.asymptotic_var = criterion(info, c) / n;
  rep.replications.resize(reps);

  parallel_for(static_cast<std::size_t>(reps), resolve_threads(threads), [&](std::size_t r) {
    DataSet data = simulate_responses(m, d, n, stream_seed(seed, r));
    Replication& out = rep.replications[r];
    try {
      FitResult f = fit_ml(m, data, m.theta0(), fit);
      out.theta_hat = f.theta;
      out.estimate = c.value().dot(f.theta);
      out.ok = std::isfinite(out.estimate);
    } catch (const SolverError&) {
      out.ok = false;
    }
  });

  // Two-pass variance in replication order, independent of the thread count.
  double sum = 0.0;
  int ok = 0;
  for (const auto& r : rep.replications) {
    if (!r.ok) continue;
    sum += r.estimate;
    ++ok;
  }
  rep.failures = reps - ok;
  if (rep.failures > 0.02 * reps)
    throw SolverError("covariance_check: " + std::to_string(rep.failures) + " of " +
                      std::to_string(reps) + " fits failed");
  rep.empirical_mean = sum / ok;
  double ss = 0.0;
  for (const auto& r : rep.replications)
    if (r.ok) ss += (r.estimate - rep.empirical_mean) * (r.estimate - rep.empirical_mean);
  rep.empirical_var = ss / (ok - 1);
  rep.ratio = rep.empirical_var / rep.asymptotic_var;
  return rep;
}

void write_replications_csv(std::ostream& os, const CovarianceReport& report) {
  os.precision(17);
  os << "rep,ok,estimate";
  const int p = report.replications.empty() ? 0 : [&] {
    for (const auto& r : report.replications)
      if (r.ok) return static_cast<int>(r.theta_hat.size());
    return 0;
  }();
  for (int l = 1; l <= p; ++l) os << ",theta" << l;
  os << '\n';
  for (std::size_t i = 0; i < report.replications.size(); ++i) {
    const auto& r = report.replications[i];
    os << i << ',' << (r.ok ? 1 : 0) << ',';
    if (r.ok) os << r.estimate;
    for (int l = 0; l < p; ++l) {
      os << ',';
      if (r.ok) os << r.theta_hat[l];
    }
    os << '\n';
  }
}

}  // namespace elfdesign
