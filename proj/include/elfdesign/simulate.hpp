#pragma once

#include "elfdesign/design.hpp"
#include "elfdesign/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace elfdesign {

/// Simulated responses for an exact design: counts[j] observations at
/// points[j], stored contiguously in y.
struct DataSet {
  std::vector<double> points;
  std::vector<int> counts;
  std::vector<double> y;
  Eigen::VectorXd theta;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(y.size()); }
  /// x value of every observation, aligned with y.
  std::vector<double> x() const;
};

/// Seed of replication `index` of a run seeded with `seed`. Streams are a
/// pure function of (seed, index), so results do not depend on the order in
/// which replications are evaluated.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

/// Apportions d to N runs and draws normal responses at theta0. Random
/// effects models draw a fresh b ~ N(theta0, omega) for every observation.
DataSet simulate_responses(const ModelSpec& m, const Design& d, int n, std::uint64_t seed);

/// Normal log-likelihood with mean mu(x, theta) and variance sigma^2(x, theta)
/// (the linearized marginal variance for random effects models). Returns
/// -infinity where the model cannot be evaluated.
double log_likelihood(const ModelSpec& m, const DataSet& data, const Eigen::VectorXd& theta);

struct FitOptions {
  int starts = 4;
  int max_iterations = 200;
  /// Relative spread of the extra starting points around theta_init.
  double spread = 0.3;
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
  std::uint64_t seed = 0;
};

struct FitResult {
  Eigen::VectorXd theta;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Maximum likelihood by Fisher scoring with Armijo backtracking and box
/// projection, from theta_init and starts - 1 perturbed points. Returns the
/// best converged start; throws SolverError when no start converges.
FitResult fit_ml(const ModelSpec& m, const DataSet& data, const Eigen::VectorXd& theta_init,
                 const FitOptions& options = {});

struct Replication {
  Eigen::VectorXd theta_hat;
  double estimate = 0.0;  // c' theta_hat
  bool ok = false;
};

struct CovarianceReport {
  int n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  int failures = 0;
  double empirical_mean = 0.0;
  double empirical_var = 0.0;
  double asymptotic_var = 0.0;
  double ratio = 0.0;
  std::vector<Replication> replications;
};

/// Runs `reps` simulate-and-fit cycles of the design with N observations and
/// compares the sample variance of c' theta_hat with c'M+c / N.
/// Bit-for-bit reproducible given (seed, reps, N), whatever the thread count.
CovarianceReport covariance_check(const ModelSpec& m, const Design& d, const TargetVector& c,
                                  int n, int reps, std::uint64_t seed, int threads = 1,
                                  const FitOptions& fit = {});

/// One line per replication: rep, ok, estimate, theta1..thetap.
void write_replications_csv(std::ostream& os, const CovarianceReport& report);

}  // namespace elfdesign
