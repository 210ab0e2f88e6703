#include "elfdesign/error.hpp"
#include "elfdesign/simulate.hpp"
#include "elfdesign/solver.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace elfdesign;

TEST_SUITE("simulate") {
  TEST_CASE("responses are reproducible and apportioned") {
    ModelSpec m = testing::mm41();
    Design d({1.1, 10}, {0.967, 0.033});
    DataSet a = simulate_responses(m, d, 200, 42);
    DataSet b = simulate_responses(m, d, 200, 42);
    DataSet c = simulate_responses(m, d, 200, 43);
    CHECK(a.y == b.y);
    CHECK(a.y != c.y);
    CHECK(a.size() == 200);
    REQUIRE(a.counts.size() == 2);
    CHECK(a.counts[0] + a.counts[1] == 200);
    CHECK(a.counts == apportion(d, 200));
    auto x = a.x();
    CHECK(x.size() == 200);
    CHECK(x.front() == 1.1);
    CHECK(x.back() == 10.0);
  }

  TEST_CASE("stream seeds differ between replications") {
    CHECK(stream_seed(1, 0) != stream_seed(1, 1));
    CHECK(stream_seed(1, 0) != stream_seed(2, 0));
    CHECK(stream_seed(7, 3) == stream_seed(7, 3));
  }

  TEST_CASE("sample mean and variance match the model") {
    ModelSpec m = testing::mm41();
    const double x = 4.0;
    DataSet data = simulate_responses(m, Design({x}, {1.0}), 100000, 5);
    const Eigen::VectorXd& t = m.theta0();
    double mu = t[0] * x / (t[1] + x);
    double var = std::exp(-t[2] * x);
    double mean = 0, sq = 0;
    for (double y : data.y) mean += y;
    mean /= data.size();
    for (double y : data.y) sq += (y - mean) * (y - mean);
    sq /= data.size() - 1;
    CHECK(std::abs(mean - mu) <= 4 * std::sqrt(var / data.size()));
    CHECK(std::abs(sq / var - 1) <= 4 * std::sqrt(2.0 / data.size()));
  }

  TEST_CASE("random effects responses have the marginal variance") {
    ModelSpec m = testing::re42();
    const double x = 0.5;
    DataSet data = simulate_responses(m, Design({x}, {1.0}), 100000, 9);
    // Exact moments under b ~ N(theta0, omega) for b1 exp(-b2 x):
    // E = t1 exp(-t2 x + w2 x^2 / 2), E[.^2] = (t1^2 + w1) exp(-2 t2 x + 2 w2 x^2).
    double t1 = 30, t2 = 1.7, w1 = 1, w2 = 0.1;
    double e1 = t1 * std::exp(-t2 * x + w2 * x * x / 2);
    double e2 = (t1 * t1 + w1) * std::exp(-2 * t2 * x + 2 * w2 * x * x);
    double var = e2 - e1 * e1 + 0.04;
    double mean = 0, sq = 0;
    for (double y : data.y) mean += y;
    mean /= data.size();
    for (double y : data.y) sq += (y - mean) * (y - mean);
    sq /= data.size() - 1;
    CHECK(std::abs(mean - e1) <= 4 * std::sqrt(var / data.size()));
    CHECK(std::abs(sq / var - 1) <= 0.05);
  }

  TEST_CASE("noise-free data recovers theta0") {
    ModelDescription desc = testing::mm41_desc();
    desc.variance = "1e-12*exp(-t3*x)";
    ModelSpec m = build_model(desc);
    DataSet data = simulate_responses(m, Design({0.5, 2, 10}, {0.3, 0.3, 0.4}), 60, 3);
    FitOptions opt;
    FitResult fit = fit_ml(m, data, 1.1 * m.theta0(), opt);
    CHECK(fit.converged);
    CHECK((fit.theta.head(2) - m.theta0().head(2)).cwiseAbs().maxCoeff() <= 1e-6);
  }

  TEST_CASE("fit improves on the true likelihood") {
    ModelSpec m = testing::mm41();
    DataSet data = simulate_responses(m, Design({0.5, 2, 10}, {0.3, 0.3, 0.4}), 200, 11);
    FitResult fit = fit_ml(m, data, m.theta0());
    CHECK(fit.converged);
    CHECK(fit.log_likelihood >= log_likelihood(m, data, m.theta0()));
    CHECK(fit.log_likelihood == doctest::Approx(log_likelihood(m, data, fit.theta)));
  }

  TEST_CASE("covariance check on the optimal design") {
    ModelSpec m = testing::mm41();
    TargetVector c = target_from_preset(m, TargetPreset::med(1));
    Design d = solve(m, c).design;
    CovarianceReport r = covariance_check(m, d, c, 200, 400, 20240601, 2);
    CHECK(r.reps == 400);
    CHECK(r.failures <= 8);
    CHECK(r.replications.size() == 400);
    CHECK(r.asymptotic_var == doctest::Approx(criterion(m, d, c) / 200));
    CHECK(r.ratio > 0.75);
    CHECK(r.ratio < 1.25);
    CHECK(std::abs(r.empirical_mean - c.value().dot(m.theta0())) < 0.05);

    CovarianceReport big = covariance_check(m, d, c, 400, 100, 1, 1);
    CHECK(big.asymptotic_var == doctest::Approx(r.asymptotic_var / 2));
  }

  TEST_CASE("results do not depend on the thread count") {
    ModelSpec m = testing::re42();
    TargetVector c = target_from_preset(m, TargetPreset::auc());
    Design d({0.13, 2.08}, {0.24, 0.76});
    CovarianceReport a = covariance_check(m, d, c, 100, 120, 77, 1);
    CovarianceReport b = covariance_check(m, d, c, 100, 120, 77, 4);
    CHECK(a.empirical_var == b.empirical_var);
    CHECK(a.failures == b.failures);
    std::ostringstream sa, sb;
    write_replications_csv(sa, a);
    write_replications_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("rep,ok,estimate,theta1,theta2\n", 0) == 0);
  }

  TEST_CASE("argument errors") {
    ModelSpec m = testing::linear();
    TargetVector c(Eigen::Vector2d(0, 1));
    Design d({-1, 1}, {0.5, 0.5});
    CHECK_THROWS_AS(covariance_check(m, d, c, 100, 99, 1), ValidationError);
    CHECK_THROWS_AS(covariance_check(m, Design({0.3}, {1.0}), c, 100, 100, 1), NotEstimableError);
  }
}
