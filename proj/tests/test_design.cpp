#include "elfdesign/design.hpp"
#include "elfdesign/error.hpp"
#include "elfdesign/solver.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace elfdesign;

namespace {

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int p, int rank) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(p, rank);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < rank; ++j) a(i, j) = n(rng);
  return a * a.transpose();
}

Design random_design(std::mt19937_64& rng, const Interval& ds, int m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x, w;
  double s = 0;
  for (int i = 0; i < m; ++i) {
    x.push_back(ds.lo + u(rng) * ds.width());
    w.push_back(0.05 + u(rng));
    s += w.back();
  }
  for (double& v : w) v /= s;
  return Design::normalized(x, w, 0.0);
}

// All compositions of n into m positive parts.
void compositions(int n, int m, std::vector<int>& cur,
                  const std::function<void(const std::vector<int>&)>& visit) {
  if (m == 1) {
    cur.push_back(n);
    visit(cur);
    cur.pop_back();
    return;
  }
  for (int a = 1; a <= n - m + 1; ++a) {
    cur.push_back(a);
    compositions(n - a, m - 1, cur, visit);
    cur.pop_back();
  }
}

double max_ratio(const std::vector<double>& w, const std::vector<int>& r, int n) {
  double v = 0;
  for (std::size_t j = 0; j < w.size(); ++j) v = std::max(v, n * w[j] / r[j]);
  return v;
}

}  // namespace

TEST_SUITE("design") {
  TEST_CASE("design validation and ordering") {
    Design d({10, 1.1}, {0.033, 0.967});
    CHECK(d.points() == std::vector<double>{1.1, 10});
    CHECK(d.weights() == std::vector<double>{0.967, 0.033});
    CHECK_THROWS_AS(Design({1, 2}, {1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(Design({1, 2}, {0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(Design({1, 1}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(Design({1, 1.05}, {0.5, 0.5}, 0.1), ValidationError);
    CHECK_THROWS_AS(Design({1}, {0.5, 0.5}), ValidationError);
    CHECK_NOTHROW(Design({1, 2}, {0.5, 0.5 + 5e-13}));
  }

  TEST_CASE("normalized merges close points and renormalizes") {
    Design d = Design::normalized({1.0, 1.00001, 5.0, 7.0}, {0.2, 0.2, 0.6, 0.0}, 1e-3);
    REQUIRE(d.size() == 2);
    CHECK(d.points()[0] == doctest::Approx(1.000005));
    CHECK(d.weights()[0] == doctest::Approx(0.4));
    double s = d.weights()[0] + d.weights()[1];
    CHECK(std::abs(s - 1.0) <= 1e-15);
  }

  TEST_CASE("target vector must be nonzero") {
    CHECK_THROWS_AS(TargetVector(Eigen::VectorXd::Zero(3)), ValidationError);
    Eigen::VectorXd bad(2);
    bad << 1, std::nan("");
    CHECK_THROWS_AS(TargetVector{bad}, ValidationError);
  }

  TEST_CASE("per-point information") {
    ModelSpec m = testing::mm41();
    CHECK(information_at(m, 1.1)(2, 2) == doctest::Approx(0.605).epsilon(1e-12));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 10);
    for (int i = 0; i < 50; ++i) {
      InfoMatrix info(information_at(m, u(rng)));
      CHECK(info.rank() <= m.k());
    }
    InfoMatrix at0(information_at(testing::re42(), 0.0));
    CHECK(at0.rank() == 1);
  }

  TEST_CASE("information matrix of simple designs") {
    ModelSpec m = testing::mm41();
    Design one({2.0}, {1.0});
    CHECK((information_matrix(m, one).matrix() - information_at(m, 2.0)).norm() <= 1e-15);
    ModelSpec lin = testing::linear();
    Design sym({-1, 1}, {0.5, 0.5});
    CHECK((information_matrix(lin, sym).matrix() - Eigen::Matrix2d::Identity()).norm() <= 1e-15);
    CHECK_THROWS_AS(information_matrix(lin, Design({-2, 1}, {0.5, 0.5})), ValidationError);
  }

  TEST_CASE("information is affine in the design") {
    ModelSpec m = testing::mm41();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 20; ++t) {
      Design a = random_design(rng, m.design_space(), 3);
      Design b = random_design(rng, m.design_space(), 2);
      double alpha = u(rng);
      std::vector<double> x = a.points(), w;
      for (double v : a.weights()) w.push_back(alpha * v);
      x.insert(x.end(), b.points().begin(), b.points().end());
      for (double v : b.weights()) w.push_back((1 - alpha) * v);
      Design mix = Design::normalized(x, w, 0.0);
      Eigen::MatrixXd lhs = information_matrix(m, mix).matrix();
      Eigen::MatrixXd rhs = alpha * information_matrix(m, a).matrix() +
                            (1 - alpha) * information_matrix(m, b).matrix();
      CHECK((lhs - rhs).norm() <= 1e-12 * (1 + rhs.norm()));
    }
  }

  TEST_CASE("pseudo-inverse") {
    auto id = pseudo_inverse(InfoMatrix(Eigen::Matrix3d::Identity()));
    CHECK(id.rank == 3);
    CHECK((id.matrix - Eigen::Matrix3d::Identity()).norm() <= 1e-15);

    Eigen::Matrix2d d2 = Eigen::Vector2d(2, 0).asDiagonal();
    auto pd = pseudo_inverse(InfoMatrix(d2));
    CHECK(pd.rank == 1);
    CHECK(pd.matrix(0, 0) == doctest::Approx(0.5));
    CHECK(pd.matrix.cwiseAbs().sum() == doctest::Approx(0.5));

    auto z = pseudo_inverse(InfoMatrix(Eigen::Matrix2d::Zero()));
    CHECK(z.rank == 0);
    CHECK(z.matrix.isZero(0.0));

    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
      int p = 2 + t % 4;
      Eigen::MatrixXd mm = random_psd(rng, p, 1 + t % p);
      InfoMatrix info(mm);
      Eigen::MatrixXd g = pseudo_inverse(info).matrix;
      CHECK((mm * g * mm - mm).norm() <= 1e-8 * (1 + mm.norm()));
      CHECK((g * mm * g - g).norm() <= 1e-8 * (1 + g.norm()));
      CHECK(info.rank() == 1 + t % p);
    }
  }

  TEST_CASE("estimability") {
    InfoMatrix id(Eigen::Matrix2d::Identity());
    CHECK(estimable(TargetVector(Eigen::Vector2d(3, -1)), id));
    InfoMatrix d(Eigen::Matrix2d(Eigen::Vector2d(1, 0).asDiagonal()));
    CHECK_FALSE(estimable(TargetVector(Eigen::Vector2d(0, 1)), d));
    CHECK(estimable(TargetVector(Eigen::Vector2d(2, 0)), d));

    ModelSpec m = testing::mm41();
    Design opt({1.1, 10}, {0.967, 0.033});
    TargetVector c = target_from_preset(m, TargetPreset::med(1));
    CHECK(estimable(c, information_matrix(m, opt)));
  }

  TEST_CASE("criterion") {
    ModelSpec lin = testing::linear();
    TargetVector c(Eigen::Vector2d(0, 1));
    CHECK(criterion(lin, Design({-1, 1}, {0.5, 0.5}), c) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(criterion(lin, Design({0.3}, {1.0}), c), NotEstimableError);

    // Brute force: no two-point design on a 200-point grid beats 1.
    double best = 1e300;
    for (int i = 0; i < 200; ++i)
      for (int j = i + 1; j < 200; ++j)
        for (int k = 1; k < 20; ++k) {
          double a = -1 + 2.0 * i / 199, b = -1 + 2.0 * j / 199, w = k / 20.0;
          best = std::min(best, criterion(lin, Design({a, b}, {w, 1 - w}), c));
        }
    CHECK(best >= 1.0 - 1e-12);

    // Scaling every f by s divides the criterion by s^2 (variance 4 -> s = 1/2).
    ModelDescription d = testing::linear_desc();
    d.variance = "4";
    Design des({-0.5, 1}, {0.3, 0.7});
    CHECK(criterion(build_model(d), des, c) ==
          doctest::Approx(4.0 * criterion(lin, des, c)).epsilon(1e-12));
  }

  TEST_CASE("criterion does not depend on the generalized inverse") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 30; ++t) {
      int p = 3 + t % 3;
      Eigen::MatrixXd mm = random_psd(rng, p, p - 1);
      InfoMatrix info(mm);
      Eigen::MatrixXd pinv = pseudo_inverse(info).matrix;
      Eigen::VectorXd c = mm * Eigen::VectorXd::NullaryExpr(p, [&] { return n(rng); });
      Eigen::MatrixXd proj = info.range_projector();
      Eigen::MatrixXd q = Eigen::MatrixXd::Identity(p, p) - proj;
      Eigen::MatrixXd y = Eigen::MatrixXd::NullaryExpr(p, p, [&] { return n(rng); });
      // Z = Q Y + P Y Q + ... any Z with M Z M = 0; Q Y and Y Q both qualify.
      Eigen::MatrixXd z = q * y + y * q;
      REQUIRE((mm * z * mm).norm() <= 1e-8 * (1 + mm.norm() * mm.norm()));
      Eigen::MatrixXd g = pinv + z;
      double ref = c.dot(pinv * c);
      CHECK(c.dot(g * c) == doctest::Approx(ref).epsilon(1e-8));
      CHECK(criterion(info, TargetVector(c)) == doctest::Approx(ref).epsilon(1e-12));
    }
  }

  TEST_CASE("adding mass never hurts estimability or the criterion") {
    ModelSpec m = testing::mm41();
    TargetVector c = target_from_preset(m, TargetPreset::med(1));
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 40; ++t) {
      Design a = random_design(rng, m.design_space(), 1 + t % 3);
      Design b = random_design(rng, m.design_space(), 1 + t % 2);
      // xi_alpha = (1 - alpha) a + alpha b has information >= (1 - alpha) M(a).
      double alpha = 0.5 * u(rng);
      std::vector<double> x = a.points(), w;
      for (double v : a.weights()) w.push_back((1 - alpha) * v);
      x.insert(x.end(), b.points().begin(), b.points().end());
      for (double v : b.weights()) w.push_back(alpha * v);
      Design mix = Design::normalized(x, w, 0.0);
      InfoMatrix ma = information_matrix(m, a);
      InfoMatrix mx = information_matrix(m, mix);
      CHECK(mx.rank() >= ma.rank());
      if (estimable(c, ma)) {
        REQUIRE(estimable(c, mx));
        CHECK(criterion(mx, c) <= criterion(ma, c) / (1 - alpha) * (1 + 1e-9));
      }
    }
  }

  TEST_CASE("apportion examples") {
    CHECK(apportion({0.967, 0.033}, 10) == std::vector<int>{9, 1});
    CHECK(apportion({0.5, 0.5}, 4) == std::vector<int>{2, 2});
    CHECK(apportion({0.24, 0.76}, 25) == std::vector<int>{6, 19});
    CHECK_THROWS_AS(apportion({0.5, 0.5}, 1), ValidationError);
  }

  TEST_CASE("apportion is minimax efficient against exhaustive enumeration") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(1e-3, 1.0);
    int checked = 0;
    for (int m = 1; m <= 3; ++m) {
      for (int n = m; n <= 30; ++n) {
        for (int rep = 0; rep < 8; ++rep) {
          std::vector<double> w(m);
          double s = 0;
          for (double& v : w) s += (v = u(rng));
          for (double& v : w) v /= s;
          std::vector<int> r = apportion(w, n);
          int total = 0;
          for (int v : r) {
            CHECK(v >= 1);
            total += v;
          }
          CHECK(total == n);
          double best = 1e300;
          std::vector<int> cur;
          compositions(n, m, cur, [&](const std::vector<int>& comp) {
            best = std::min(best, max_ratio(w, comp, n));
          });
          CHECK(max_ratio(w, r, n) <= best * (1 + 1e-12));
          ++checked;
        }
      }
    }
    CHECK(checked == 8 * (30 + 29 + 28));
  }
}
