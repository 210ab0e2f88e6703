#pragma once

#include "elfdesign/design.hpp"
#include "elfdesign/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace elfdesign {

/// One generating point sum_l eps_l f_l(x) of the generalized Elfving set.
struct Generator {
  double x = 0.0;
  Eigen::VectorXd eps;  // unit vector of length k
  Eigen::VectorXd g;    // length p
};

struct GeneratorSet {
  std::vector<Generator> generators;
  /// Grid points skipped because the contributions could not be evaluated.
  int skipped_points = 0;
};

/// Unit directions used for the eps coefficients, closed under negation.
/// k = 1: {+1, -1}; k = 2: n_eps equally spaced angles (n_eps even);
/// k >= 3: n_eps / 2 rotated Halton points mapped to the sphere plus their
/// negations, the rotation derived from `seed`.
std::vector<Eigen::VectorXd> eps_directions(int k, int n_eps, std::uint64_t seed = 0);

/// Generator for a given x and direction.
Generator make_generator(const ModelSpec& m, double x, const Eigen::VectorXd& eps);

/// Generators over a uniform n_x grid of the design space times eps_directions.
GeneratorSet generator_grid(const ModelSpec& m, int n_x, int n_eps, std::uint64_t seed = 0,
                            int threads = 1);

struct RepresentationTerm {
  Generator generator;
  double lambda = 0.0;
};

/// Boundary point gamma*c written as a convex combination of generators,
/// together with the supporting hyperplane d (gamma c'd = 1, d'g <= 1 on
/// every generator of the LP).
struct ElfvingRepresentation {
  double gamma = 0.0;
  std::vector<RepresentationTerm> terms;
  Eigen::VectorXd d;
  int lp_iterations = 0;
};

/// Maximizes gamma subject to sum_i lambda_i g_i = gamma c, sum_i lambda_i = 1,
/// lambda >= 0. Throws NotEstimableError when gamma_max is zero and
/// SolverError when the LP fails.
ElfvingRepresentation max_scaling_lp(const std::vector<Generator>& gens, const TargetVector& c);

struct ExtractedDesign {
  Design design;
  /// Unit eps coefficients per support point, aligned with design.points().
  std::vector<Eigen::VectorXd> eps;
};

/// Groups the active generators by x (gap <= merge_tol), summing lambda and
/// averaging eps with lambda weights before renormalizing. Throws
/// ValidationError when a group's averaged eps has norm below 0.5.
ExtractedDesign extract_design(const ElfvingRepresentation& rep, double merge_tol);

/// Design part of extract_design, without the eps consistency requirement.
Design group_support(const ElfvingRepresentation& rep, double merge_tol);

struct PlotRecord {
  enum class Kind { kGenerator, kHull, kRay, kIntersection };
  Kind kind;
  Eigen::VectorXd coords;
  double x = 0.0;
  Eigen::VectorXd eps;  // empty unless kind == kGenerator
};

struct PlotData {
  int k = 1;
  std::vector<int> dims;  // 0-based coordinates of R^p
  double gamma = 0.0;
  std::vector<PlotRecord> records;
};

/// Projection of the generator cloud on `dims` (2 or 3 coordinates, 0-based),
/// the convex hull of the projection in the 2D case, the ray through c and
/// the boundary point gamma c.
PlotData plot_boundary(const ModelSpec& m, const std::vector<int>& dims, int n_x, int n_eps,
                       const TargetVector& c, std::uint64_t seed = 0, int threads = 1);

/// CSV with header kind,coord1,coord2[,coord3],x,eps1..epsk.
void write_plot_csv(std::ostream& os, const PlotData& plot);

/// Counter-clockwise convex hull of 2D points (collinear points dropped).
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts);

}  // namespace elfdesign
