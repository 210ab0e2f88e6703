#include "elfdesign/verify.hpp"

#include "elfdesign/error.hpp"
#include "elfdesign/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace elfdesign {

SensitivityFunction::SensitivityFunction(const ModelSpec& m, const Design& d,
                                         const TargetVector& c)
    : model_(&m) {
  InfoMatrix info = information_matrix(m, d);
  if (!estimable(c, info)) throw NotEstimableError("c'theta is not estimable under this design");
  a_ = pseudo_inverse(info).matrix * c.value();
  criterion_ = c.value().dot(a_);
}

double SensitivityFunction::operator()(double x) const {
  Eigen::VectorXd proj = model_->contributions(x).transpose() * a_;
  return proj.squaredNorm() / criterion_;
}

double sensitivity(const ModelSpec& m, const Design& d, const TargetVector& c, double x) {
  return SensitivityFunction(m, d, c)(x);
}

std::vector<double> uniform_grid(const Interval& ds, int n) {
  if (n < 2) throw ValidationError("grid size must be >= 2");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = ds.lo + ds.width() * i / (n - 1);
  g.back() = ds.hi;
  return g;
}

std::vector<std::pair<double, double>> sensitivity_trace(const ModelSpec& m, const Design& d,
                                                         const TargetVector& c, int grid_n,
                                                         int threads) {
  SensitivityFunction phi(m, d, c);
  auto grid = uniform_grid(m.design_space(), grid_n);
  std::vector<std::pair<double, double>> out(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) { out[i] = {grid[i], phi(grid[i])}; });
  return out;
}

HyperplaneCheck hyperplane_certificate(const ModelSpec& m, const Eigen::VectorXd& d, double gamma,
                                       const TargetVector& c, const std::vector<double>& grid,
                                       double tol, int threads) {
  if (d.size() != m.p()) throw ValidationError("hyperplane vector length must equal p");
  HyperplaneCheck out;
  out.gamma_c_d = gamma * c.value().dot(d);
  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    vals[i] = (m.contributions(grid[i]).transpose() * d).squaredNorm();
  });
  out.max_value = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (vals[i] > out.max_value) {
      out.max_value = vals[i];
      out.argmax_x = grid[i];
    }
  }
  out.pass = gamma > 0.0 && std::abs(out.gamma_c_d - 1.0) <= 1e-8 && out.max_value <= 1.0 + tol;
  return out;
}

OptimalityCertificate verify_design(const ModelSpec& m, const Design& d, const TargetVector& c,
                                    const VerifyOptions& options) {
  SensitivityFunction phi(m, d, c);
  auto grid = uniform_grid(m.design_space(), options.grid_n);

  OptimalityCertificate cert;
  cert.criterion = phi.criterion();
  cert.tol = options.tol;
  cert.grid_size = static_cast<int>(grid.size() + d.size());

  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), options.threads, [&](std::size_t i) { vals[i] = phi(grid[i]); });
  cert.max_sensitivity = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (vals[i] > cert.max_sensitivity) {
      cert.max_sensitivity = vals[i];
      cert.argmax_x = grid[i];
    }
  }
  bool residuals_ok = true;
  for (double x : d.points()) {
    double v = phi(x);
    if (v > cert.max_sensitivity) {
      cert.max_sensitivity = v;
      cert.argmax_x = x;
    }
    double r = std::abs(v - 1.0);
    cert.support_residuals.push_back(r);
    residuals_ok = residuals_ok && r <= options.tol;
  }
  cert.efficiency_lower_bound = std::max(0.0, 2.0 - cert.max_sensitivity);
  if (options.gamma)
    cert.duality_gap = std::abs(*options.gamma * *options.gamma * cert.criterion - 1.0);
  cert.pass = cert.max_sensitivity <= 1.0 + options.tol && residuals_ok;
  cert.optimal = cert.pass;

  if (options.hyperplane) {
    std::vector<double> hgrid = grid;
    hgrid.insert(hgrid.end(), d.points().begin(), d.points().end());
    cert.hyperplane = hyperplane_certificate(m, options.hyperplane->first,
                                             options.hyperplane->second, c, hgrid, options.tol,
                                             options.threads);
    if (!cert.pass && cert.hyperplane->pass) {
      cert.optimal = true;
      cert.note =
          "Moore-Penrose sensitivity check failed but the supporting-hyperplane certificate "
          "holds; another generalized inverse satisfies the equivalence inequality";
    }
  }
  return cert;
}

}  // namespace elfdesign
