#include "elfdesign/elfving.hpp"

#include "elfdesign/error.hpp"
#include "elfdesign/lp.hpp"
#include "elfdesign/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>

namespace elfdesign {
namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_from_bits(std::uint64_t z) { return static_cast<double>(z >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<Eigen::VectorXd> eps_directions(int k, int n_eps, std::uint64_t seed) {
  if (k < 1) throw ValidationError("eps_directions: k must be >= 1");
  std::vector<Eigen::VectorXd> dirs;
  if (k == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return dirs;
  }
  if (n_eps < 2 || n_eps % 2 != 0)
    throw ValidationError("n_eps must be an even number >= 2");
  if (k == 2) {
    for (int j = 0; j < n_eps; ++j) {
      double phi = 2.0 * std::numbers::pi * j / n_eps;
      Eigen::VectorXd e(2);
      e << std::cos(phi), std::sin(phi);
      dirs.push_back(e);
    }
    return dirs;
  }

  const int coords = 2 * ((k + 1) / 2);
  if (coords > static_cast<int>(std::size(kPrimes)))
    throw ValidationError("eps_directions: k too large");
  std::vector<double> shift(coords);
  for (int c = 0; c < coords; ++c) shift[c] = unit_from_bits(splitmix64(seed * 1315423911ULL + c));

  const int half = n_eps / 2;
  std::vector<Eigen::VectorXd> half_set;
  for (std::uint64_t i = 1; static_cast<int>(half_set.size()) < half; ++i) {
    Eigen::VectorXd z(coords);
    for (int c = 0; c < coords; c += 2) {
      double u1 = radical_inverse(i, kPrimes[c]) + shift[c];
      double u2 = radical_inverse(i, kPrimes[c + 1]) + shift[c + 1];
      u1 -= std::floor(u1);
      u2 -= std::floor(u2);
      if (u1 <= 0.0) u1 = 0x1.0p-53;
      double rad = std::sqrt(-2.0 * std::log(u1));
      z[c] = rad * std::cos(2.0 * std::numbers::pi * u2);
      z[c + 1] = rad * std::sin(2.0 * std::numbers::pi * u2);
    }
    Eigen::VectorXd e = z.head(k);
    double nrm = e.norm();
    if (nrm < 1e-12) continue;
    half_set.push_back(e / nrm);
  }
  for (const auto& e : half_set) dirs.push_back(e);
  for (const auto& e : half_set) dirs.push_back(-e);
  return dirs;
}

Generator make_generator(const ModelSpec& m, double x, const Eigen::VectorXd& eps) {
  if (eps.size() != m.k()) throw ValidationError("generator: eps length must equal k");
  Generator g;
  g.x = x;
  g.eps = eps;
  g.g = m.contributions(x) * eps;
  return g;
}

GeneratorSet generator_grid(const ModelSpec& m, int n_x, int n_eps, std::uint64_t seed,
                            int threads) {
  if (n_x < 2) throw ValidationError("n_x must be >= 2");
  if (m.k() >= 2 && n_eps < 2) throw ValidationError("n_eps must be >= 2");
  const auto dirs = eps_directions(m.k(), n_eps, seed);
  const Interval& ds = m.design_space();

  std::vector<std::optional<Eigen::MatrixXd>> contrib(n_x);
  parallel_for(static_cast<std::size_t>(n_x), threads, [&](std::size_t i) {
    double x = i + 1 == static_cast<std::size_t>(n_x) ? ds.hi : ds.lo + ds.width() * i / (n_x - 1);
    try {
      contrib[i] = m.contributions(x);
    } catch (const DomainError&) {
    }
  });

  GeneratorSet out;
  out.generators.reserve(static_cast<std::size_t>(n_x) * dirs.size());
  for (int i = 0; i < n_x; ++i) {
    if (!contrib[i]) {
      ++out.skipped_points;
      continue;
    }
    double x = i + 1 == n_x ? ds.hi : ds.lo + ds.width() * i / (n_x - 1);
    for (const auto& e : dirs) out.generators.push_back({x, e, *contrib[i] * e});
  }
  return out;
}

ElfvingRepresentation max_scaling_lp(const std::vector<Generator>& gens, const TargetVector& c) {
  if (gens.empty()) throw ValidationError("max_scaling_lp: no generators");
  const int p = c.size();
  const int n = static_cast<int>(gens.size());

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p + 1, n + 1);
  for (int i = 0; i < n; ++i) {
    if (gens[i].g.size() != p) throw ValidationError("max_scaling_lp: generator length != p");
    a.col(i).head(p) = gens[i].g;
    a(p, i) = 1.0;
  }
  a.col(n).head(p) = -c.value();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
  b[p] = 1.0;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n + 1);
  cost[n] = 1.0;

  LpResult lp = solve_lp(a, b, cost);
  switch (lp.status) {
    case LpResult::Status::kOptimal: break;
    case LpResult::Status::kInfeasible:
      throw SolverError("max_scaling_lp: the generator hull does not contain the origin");
    case LpResult::Status::kUnbounded: throw SolverError("max_scaling_lp: LP is unbounded");
    case LpResult::Status::kIterationLimit:
      throw SolverError("max_scaling_lp: simplex iteration limit reached");
  }

  double gscale = 0.0;
  for (const auto& g : gens) gscale = std::max(gscale, g.g.norm());
  const double gamma = lp.objective;
  if (!(gamma * c.value().norm() > 1e-12 * std::max(gscale, 1e-300)))
    throw NotEstimableError("target not estimable on this grid (gamma_max = 0)");

  ElfvingRepresentation rep;
  rep.gamma = gamma;
  rep.lp_iterations = lp.iterations;
  for (int i = 0; i < n; ++i)
    if (lp.x[i] > 1e-10) rep.terms.push_back({gens[i], lp.x[i]});

  Eigen::VectorXd u = -lp.duals.head(p);
  double cu = c.value().dot(u);
  if (!(std::abs(cu) > 0.0)) throw SolverError("max_scaling_lp: degenerate dual (c'u = 0)");
  rep.d = u / (gamma * cu);
  return rep;
}

Design group_support(const ElfvingRepresentation& rep, double merge_tol) {
  if (rep.terms.empty()) throw ValidationError("representation has no active generators");
  std::vector<double> xs, ws;
  for (const auto& t : rep.terms) {
    xs.push_back(t.generator.x);
    ws.push_back(t.lambda);
  }
  return Design::normalized(xs, ws, merge_tol);
}

ExtractedDesign extract_design(const ElfvingRepresentation& rep, double merge_tol) {
  if (rep.terms.empty()) throw ValidationError("representation has no active generators");
  std::vector<const RepresentationTerm*> terms;
  for (const auto& t : rep.terms) terms.push_back(&t);
  std::sort(terms.begin(), terms.end(),
            [](auto* a, auto* b) { return a->generator.x < b->generator.x; });

  std::vector<double> xs, ws;
  std::vector<Eigen::VectorXd> eps;
  for (std::size_t j = 0; j < terms.size();) {
    const double start = terms[j]->generator.x;
    double wsum = 0.0, xsum = 0.0;
    Eigen::VectorXd esum = Eigen::VectorXd::Zero(terms[j]->generator.eps.size());
    std::size_t e = j;
    while (e < terms.size() && terms[e]->generator.x - start <= merge_tol) {
      wsum += terms[e]->lambda;
      xsum += terms[e]->lambda * terms[e]->generator.x;
      esum += terms[e]->lambda * terms[e]->generator.eps;
      ++e;
    }
    Eigen::VectorXd mean = esum / wsum;
    if (mean.norm() < 0.5)
      throw ValidationError("extract_design: conflicting eps directions at x = " +
                            std::to_string(xsum / wsum) + "; the eps grid is too coarse");
    xs.push_back(xsum / wsum);
    ws.push_back(wsum);
    eps.push_back(mean / mean.norm());
    j = e;
  }
  ExtractedDesign out{Design::normalized(xs, ws, 0.0), std::move(eps)};
  return out;
}

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

PlotData plot_boundary(const ModelSpec& m, const std::vector<int>& dims, int n_x, int n_eps,
                       const TargetVector& c, std::uint64_t seed, int threads) {
  if (dims.size() != 2 && dims.size() != 3)
    throw ValidationError("plot dims: select 2 or 3 coordinates");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 0 || dims[i] >= m.p())
      throw ValidationError("plot dims: coordinate out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (dims[i] == dims[j]) throw ValidationError("plot dims: coordinates must be distinct");
  }
  GeneratorSet gens = generator_grid(m, n_x, n_eps, seed, threads);
  ElfvingRepresentation rep = max_scaling_lp(gens.generators, c);

  auto project = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) out[i] = v[dims[i]];
    return out;
  };

  PlotData plot;
  plot.k = m.k();
  plot.dims = dims;
  plot.gamma = rep.gamma;
  for (const auto& g : gens.generators)
    plot.records.push_back({PlotRecord::Kind::kGenerator, project(g.g), g.x, g.eps});

  if (dims.size() == 2) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& g : gens.generators) pts.emplace_back(g.g[dims[0]], g.g[dims[1]]);
    auto hull = convex_hull_2d(std::move(pts));
    if (!hull.empty()) hull.push_back(hull.front());
    for (const auto& h : hull)
      plot.records.push_back({PlotRecord::Kind::kHull, Eigen::VectorXd(h), 0.0, {}});
  }
  plot.records.push_back(
      {PlotRecord::Kind::kRay, Eigen::VectorXd::Zero(dims.size()), 0.0, {}});
  plot.records.push_back({PlotRecord::Kind::kRay, project(1.25 * rep.gamma * c.value()), 0.0, {}});
  plot.records.push_back(
      {PlotRecord::Kind::kIntersection, project(rep.gamma * c.value()), 0.0, {}});
  return plot;
}

void write_plot_csv(std::ostream& os, const PlotData& plot) {
  const std::size_t nd = plot.dims.size();
  os << "kind";
  for (std::size_t i = 0; i < nd; ++i) os << ",coord" << i + 1;
  os << ",x";
  for (int l = 0; l < plot.k; ++l) os << ",eps" << l + 1;
  os << '\n';
  const auto old_precision = os.precision(12);
  for (const auto& r : plot.records) {
    switch (r.kind) {
      case PlotRecord::Kind::kGenerator: os << "generator"; break;
      case PlotRecord::Kind::kHull: os << "hull"; break;
      case PlotRecord::Kind::kRay: os << "ray"; break;
      case PlotRecord::Kind::kIntersection: os << "intersection"; break;
    }
    for (Eigen::Index i = 0; i < r.coords.size(); ++i) os << ',' << r.coords[i];
    os << ',';
    if (r.kind == PlotRecord::Kind::kGenerator) os << r.x;
    for (int l = 0; l < plot.k; ++l) {
      os << ',';
      if (r.kind == PlotRecord::Kind::kGenerator) os << r.eps[l];
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace elfdesign
