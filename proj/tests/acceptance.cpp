// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "elfdesign/config.hpp"
#include "elfdesign/design.hpp"
#include "elfdesign/elfving.hpp"
#include "elfdesign/model.hpp"
#include "elfdesign/parallel.hpp"
#include "elfdesign/simulate.hpp"
#include "elfdesign/solver.hpp"
#include "elfdesign/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace elfdesign;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fixture(const std::string& name) { return std::string(ELFDESIGN_FIXTURE_DIR) + "/" + name; }

struct Problem {
  Config config;
  ModelSpec model;
  TargetVector c;
};

Problem load(const std::string& name) {
  Config cfg = load_config(fixture(name));
  ModelSpec m = build_model(cfg.model);
  TargetVector c = resolve_target(cfg, m);
  return {std::move(cfg), std::move(m), std::move(c)};
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

bool design_close(const Design& d, const std::vector<double>& x, const std::vector<double>& w,
                  double xtol, double wtol) {
  if (d.size() != x.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(d.points()[i] - x[i]) > xtol || std::abs(d.weights()[i] - w[i]) > wtol)
      return false;
  return true;
}

std::string describe(const Design& d) {
  std::ostringstream os;
  os.precision(5);
  os << "{";
  for (std::size_t i = 0; i < d.size(); ++i)
    os << (i ? ", " : "") << d.points()[i] << ":" << d.weights()[i];
  os << "}";
  return os.str();
}

// Andrew's monotone chain; counter-clockwise hull without collinear points.
std::vector<Eigen::Vector2d> hull(std::vector<Eigen::Vector2d> p) {
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

// Exit parameter of the ray t c from the origin through the polygon boundary.
double ray_exit(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& c) {
  double best = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d& a = poly[i];
    const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
    // t c = a + s (b - a)
    Eigen::Matrix2d m;
    m << c.x(), a.x() - b.x(), c.y(), a.y() - b.y();
    if (std::abs(m.determinant()) < 1e-14) continue;
    Eigen::Vector2d ts = m.partialPivLu().solve(a);
    if (ts[1] >= -1e-12 && ts[1] <= 1 + 1e-12 && ts[0] > best) best = ts[0];
  }
  return best;
}

// Convex objective minimized by golden section on [lo, hi].
double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 120; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  return std::min(f1, f2);
}

// max_j N p_j / r_j for integer counts r >= 1.
double loss(const std::vector<double>& p, const std::vector<int>& r, int n) {
  double worst = 0;
  for (std::size_t j = 0; j < p.size(); ++j) worst = std::max(worst, n * p[j] / r[j]);
  return worst;
}

double best_loss(const std::vector<double>& p, int n) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> r(p.size(), 1);
  std::function<void(std::size_t, int)> rec = [&](std::size_t j, int left) {
    if (j + 1 == p.size()) {
      if (left < 1) return;
      r[j] = left;
      best = std::min(best, loss(p, r, n));
      return;
    }
    for (int v = 1; v <= left - static_cast<int>(p.size() - j - 1); ++v) {
      r[j] = v;
      rec(j + 1, left - v);
    }
  };
  rec(0, n);
  return best;
}

}  // namespace

int main() {
  const int threads = resolve_threads(0);
  Problem mm = load("mm41.json");
  Problem re = load("re42.json");

  // 1
  auto t0 = Clock::now();
  SolveResult mm_sol = solve(mm.model, mm.c, mm.config.solve);
  double mm_time = seconds_since(t0);
  report("AC1",
         design_close(mm_sol.design, {1.1, 10}, {0.967, 0.033}, 0.05, 0.01) && mm_time < 30,
         describe(mm_sol.design) + fmt(" in %.2f s", mm_time));

  // 2
  SolveResult re_sol = solve(re.model, re.c, re.config.solve);
  report("AC2", design_close(re_sol.design, {0.13, 2.08}, {0.24, 0.76}, 0.02, 0.01),
         describe(re_sol.design));

  // 3
  {
    bool ok = true;
    std::string detail;
    for (const auto* pr : {&mm, &re}) {
      const Design& d = pr == &mm ? mm_sol.design : re_sol.design;
      VerifyOptions opt;
      opt.grid_n = 10000;
      opt.threads = threads;
      OptimalityCertificate cert = verify_design(pr->model, d, pr->c, opt);
      double worst = 0;
      SensitivityFunction phi(pr->model, d, pr->c);
      for (double x : d.points()) worst = std::max(worst, std::abs(phi(x) - 1));
      ok = ok && cert.max_sensitivity <= 1 + 1e-4 && worst <= 1e-4;
      detail += fmt("max phi %.8f, max |phi(x_r)-1| %.2e; ", cert.max_sensitivity, worst);
    }
    report("AC3", ok, detail);
  }

  // 4
  {
    double g1 = std::abs(mm_sol.gamma * mm_sol.gamma * mm_sol.criterion_value - 1);
    double g2 = std::abs(re_sol.gamma * re_sol.gamma * re_sol.criterion_value - 1);
    report("AC4", g1 <= 1e-6 && g2 <= 1e-6, fmt("gaps %.2e, %.2e", g1, g2));
  }

  // 5
  {
    Problem link = load("link_quadratic.json");
    ModelDescription rd = link.config.model;
    rd.reduced = true;
    ModelSpec reduced = build_model(rd);
    SolveResult full = solve(link.model, link.c, link.config.solve);
    SolveResult red = solve(reduced, link.c, link.config.solve);
    double rel = std::abs(full.criterion_value / red.criterion_value - 1);
    bool ok = rel <= 1e-6 && full.design.size() == red.design.size() && link.model.k() == 2 &&
              reduced.k() == 1;
    double dx = 0;
    if (ok)
      for (std::size_t i = 0; i < full.design.size(); ++i)
        dx = std::max(dx, std::abs(full.design.points()[i] - red.design.points()[i]));
    ok = ok && dx <= 1e-3;
    report("AC5", ok,
           fmt("criterion %.9g vs %.9g, rel %.2e, max point gap %.2e", full.criterion_value,
               red.criterion_value, rel, dx));
  }

  // 6
  {
    Problem lin = load("linear_slope.json");
    SolveResult r = solve(lin.model, lin.c, lin.config.solve);
    std::vector<double> grid = uniform_grid(lin.model.design_space(), 200);
    double brute = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t j = i + 1; j < grid.size(); ++j) {
        auto crit = [&](double w) {
          return criterion(lin.model, Design({grid[i], grid[j]}, {w, 1 - w}), lin.c);
        };
        brute = std::min(brute, golden_min(crit, 1e-6, 1 - 1e-6));
      }
    bool ok = design_close(r.design, {-1, 1}, {0.5, 0.5}, 1e-8, 1e-8) &&
              std::abs(r.criterion_value - 1) <= 1e-8 && std::abs(brute - r.criterion_value) <= 1e-8;
    report("AC6", ok,
           describe(r.design) + fmt(" criterion %.12f, brute force %.12f", r.criterion_value, brute));
  }

  // 7
  {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n(0, 1);
    std::uniform_int_distribution<int> pairs(2, 25);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      int h = pairs(rng);
      std::vector<Generator> gens;
      std::vector<Eigen::Vector2d> pts;
      for (int i = 0; i < h; ++i) {
        Eigen::Vector2d v(n(rng), n(rng));
        for (double s : {1.0, -1.0}) {
          Generator g;
          g.x = i;
          g.eps = Eigen::VectorXd::Constant(1, s);
          g.g = s * v;
          gens.push_back(g);
          pts.push_back(s * v);
        }
      }
      Eigen::Vector2d c(n(rng), n(rng));
      double oracle = ray_exit(hull(pts), c);
      double gamma = max_scaling_lp(gens, TargetVector(c)).gamma;
      worst = std::max(worst, std::abs(gamma - oracle) / std::max(1.0, oracle));
    }
    report("AC7", worst <= 1e-8, fmt("100 sets, max relative gap %.2e", worst));
  }

  // 8
  {
    bool ok = true;
    std::string detail;
    for (const char* name : {"mm41.json", "re42.json", "linear_slope.json", "link_quadratic.json"}) {
      Problem p = load(name);
      ModelGradientCheck g = check_model_gradients(p.model, 100, p.config.gradcheck.seed);
      ok = ok && g.pass() && g.draws == 100;
      detail += std::string(name) + fmt(" %.1e/%.1e; ", g.grad_error, g.hess_error);
    }
    report("AC8", ok, detail);
  }

  // 9
  {
    Problem link = load("link_quadratic.json");
    ModelDescription rd = link.config.model;
    rd.reduced = true;
    ModelSpec reduced = build_model(rd);
    std::vector<double> grid = uniform_grid(link.model.design_space(), 1000);
    double worst = 0;
    for (double x : grid)
      worst = std::max(worst, (information_at(link.model, x) - information_at(reduced, x))
                                  .cwiseAbs()
                                  .maxCoeff());
    report("AC9", worst <= 1e-10, fmt("1000 points, max deviation %.2e", worst));
  }

  // 10
  {
    const SimulateConfig& s = mm.config.simulate;
    auto t1 = Clock::now();
    CovarianceReport opt = covariance_check(mm.model, mm_sol.design, mm.c, s.n, s.reps, s.seed,
                                            threads);
    double elapsed = seconds_since(t1);
    Design uniform({0, 5, 10}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    CovarianceReport uni =
        covariance_check(mm.model, uniform, mm.c, s.n, s.reps, s.seed, threads);
    bool ok = opt.ratio >= 0.85 && opt.ratio <= 1.15 && opt.empirical_var < uni.empirical_var &&
              elapsed < 300 && s.n == 200 && s.reps == 2000;
    report("AC10", ok,
           fmt("ratio %.4f, var %.3e vs uniform %.3e, failures %g, %.1f s", opt.ratio,
               opt.empirical_var, uni.empirical_var, opt.failures, elapsed));
  }

  // 11
  {
    bool ok = apportion(std::vector<double>{0.967, 0.033}, 10) == std::vector<int>{9, 1};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    int checked = 0;
    for (int m = 1; m <= 3; ++m)
      for (int n = m; n <= 30; ++n)
        for (int rep = 0; rep < 8; ++rep) {
          std::vector<double> p(m);
          double sum = 0;
          for (double& v : p) sum += v = u(rng);
          for (double& v : p) v /= sum;
          std::vector<int> r = apportion(p, n);
          int total = 0;
          for (int v : r) {
            ok = ok && v >= 1;
            total += v;
          }
          ok = ok && total == n && static_cast<int>(r.size()) == m &&
               loss(p, r, n) <= best_loss(p, n) * (1 + 1e-12);
          ++checked;
        }
    report("AC11", ok, fmt("(9, 1) and %g exhaustive cases", checked));
  }

  std::printf("%s\n", failures == 0 ? "ALL PASS" : "SOME FAILED");
  return failures == 0 ? 0 : 1;
}
