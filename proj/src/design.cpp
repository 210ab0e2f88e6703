#include "elfdesign/design.hpp"

#include "elfdesign/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace elfdesign {

TargetVector::TargetVector(Eigen::VectorXd c) : c_(std::move(c)) {
  if (c_.size() == 0 || !c_.allFinite() || !(c_.norm() > 0.0))
    throw ValidationError("target vector must be finite and nonzero");
}

// ---------------------------------------------------------------------------
// Design

Design::Design(std::vector<double> points, std::vector<double> weights, double min_gap) {
  if (points.empty()) throw ValidationError("design: no support points");
  if (points.size() != weights.size())
    throw ValidationError("design: points and weights differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i])) throw ValidationError("design.points: non-finite entry");
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw ValidationError("design.weights: weights must be strictly positive");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ValidationError("design.weights: weights sum to " + std::to_string(sum) + ", not 1");

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });
  points_.reserve(points.size());
  weights_.reserve(points.size());
  for (auto i : order) {
    if (!points_.empty() && points[i] - points_.back() <= min_gap)
      throw ValidationError("design.points: support points are not distinct");
    points_.push_back(points[i]);
    weights_.push_back(weights[i]);
  }
}

Design Design::normalized(const std::vector<double>& points, const std::vector<double>& weights,
                          double merge_tol) {
  if (points.size() != weights.size())
    throw ValidationError("design: points and weights differ in length");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (weights[i] > 0.0) order.push_back(i);
  if (order.empty()) throw ValidationError("design: no positive weights");
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });

  std::vector<double> xs, ws;
  double total = 0.0;
  for (std::size_t j = 0; j < order.size();) {
    double wsum = 0.0, xsum = 0.0;
    double start = points[order[j]];
    std::size_t e = j;
    while (e < order.size() && points[order[e]] - start <= merge_tol) {
      wsum += weights[order[e]];
      xsum += weights[order[e]] * points[order[e]];
      ++e;
    }
    xs.push_back(xsum / wsum);
    ws.push_back(wsum);
    total += wsum;
    j = e;
  }
  for (double& w : ws) w /= total;
  // Rescaling leaves the sum within a few ulps of one; fold the residual
  // into the largest weight.
  double s = std::accumulate(ws.begin(), ws.end(), 0.0);
  *std::max_element(ws.begin(), ws.end()) += 1.0 - s;
  return Design(std::move(xs), std::move(ws));
}

// ---------------------------------------------------------------------------
// InfoMatrix

InfoMatrix::InfoMatrix(const Eigen::MatrixXd& m, double rank_tol) : tol_(rank_tol) {
  if (m.rows() != m.cols()) throw ValidationError("information matrix must be square");
  m_ = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_);
  eigvals_ = es.eigenvalues();
  eigvecs_ = es.eigenvectors();
  double top = eigvals_.size() ? eigvals_.cwiseAbs().maxCoeff() : 0.0;
  rank_ = 0;
  if (top > 0.0)
    for (Eigen::Index i = 0; i < eigvals_.size(); ++i)
      if (eigvals_[i] > tol_ * top) ++rank_;
}

Eigen::MatrixXd InfoMatrix::range_projector() const {
  const int p = size();
  Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(p, p);
  double top = eigvals_.size() ? eigvals_.cwiseAbs().maxCoeff() : 0.0;
  if (top == 0.0) return proj;
  for (int i = 0; i < p; ++i)
    if (eigvals_[i] > tol_ * top) proj += eigvecs_.col(i) * eigvecs_.col(i).transpose();
  return proj;
}

Eigen::MatrixXd information_at(const ModelSpec& m, double x) {
  Eigen::MatrixXd f = m.contributions(x);
  return f * f.transpose();
}

InfoMatrix information_matrix(const ModelSpec& m, const Design& d, double rank_tol) {
  const Interval& ds = m.design_space();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m.p(), m.p());
  for (std::size_t r = 0; r < d.size(); ++r) {
    double x = d.points()[r];
    if (!ds.contains(x))
      throw ValidationError("design.points: " + std::to_string(x) + " outside the design space");
    sum += d.weights()[r] * information_at(m, x);
  }
  return InfoMatrix(sum, rank_tol);
}

PseudoInverse pseudo_inverse(const InfoMatrix& m) {
  const int p = m.size();
  PseudoInverse out{Eigen::MatrixXd::Zero(p, p), 0};
  const auto& ev = m.eigenvalues();
  double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  if (top == 0.0) return out;
  for (int i = 0; i < p; ++i) {
    if (ev[i] > m.rank_tol() * top) {
      out.matrix += (1.0 / ev[i]) * m.eigenvectors().col(i) * m.eigenvectors().col(i).transpose();
      ++out.rank;
    }
  }
  return out;
}

bool estimable(const TargetVector& c, const InfoMatrix& m) {
  if (c.size() != m.size()) throw ValidationError("target vector length does not match p");
  const Eigen::VectorXd& v = c.value();
  return (v - m.range_projector() * v).norm() <= 1e-8 * v.norm();
}

double criterion(const InfoMatrix& m, const TargetVector& c) {
  if (!estimable(c, m)) throw NotEstimableError("c'theta is not estimable under this design");
  return c.value().dot(pseudo_inverse(m).matrix * c.value());
}

double criterion(const ModelSpec& m, const Design& d, const TargetVector& c) {
  return criterion(information_matrix(m, d), c);
}

// ---------------------------------------------------------------------------
// Apportionment

std::vector<int> apportion(const std::vector<double>& weights, int n) {
  const int m = static_cast<int>(weights.size());
  if (m == 0) throw ValidationError("apportion: empty design");
  if (n < m)
    throw ValidationError("apportion: N = " + std::to_string(n) + " is smaller than the " +
                          std::to_string(m) + " support points");
  for (double w : weights)
    if (!(w > 0.0)) throw ValidationError("apportion: weights must be positive");

  std::vector<int> r(m);
  long total = 0;
  for (int j = 0; j < m; ++j) {
    r[j] = std::max(1, static_cast<int>(std::ceil((n - 0.5 * m) * weights[j])));
    total += r[j];
  }
  while (total < n) {
    int best = 0;
    for (int j = 1; j < m; ++j)
      if (r[j] / weights[j] < r[best] / weights[best]) best = j;
    ++r[best];
    ++total;
  }
  while (total > n) {
    int best = -1;
    for (int j = 0; j < m; ++j) {
      if (r[j] <= 1) continue;
      if (best < 0 || (r[j] - 1) / weights[j] > (r[best] - 1) / weights[best]) best = j;
    }
    --r[best];
    --total;
  }
  return r;
}

std::vector<int> apportion(const Design& d, int n) { return apportion(d.weights(), n); }

}  // namespace elfdesign
