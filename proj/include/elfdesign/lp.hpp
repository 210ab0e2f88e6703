#pragma once

#include <Eigen/Dense>

#include <vector>

namespace elfdesign {

struct LpOptions {
  int max_iterations = 200000;
  double pivot_tol = 1e-11;
  double feasibility_tol = 1e-9;
  /// Consecutive degenerate pivots after which pricing switches from
  /// Dantzig's rule to Bland's rule for the rest of the solve.
  int degenerate_streak = 20;
};

struct LpResult {
  enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

  Status status = Status::kInfeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
  /// Dual values y with y'A_j >= cost_j for every column, y'b = objective.
  Eigen::VectorXd duals;
  /// Basic column of each row; -1 marks a redundant row kept on an artificial.
  std::vector<int> basis;
  int iterations = 0;
};

/// Dense two-phase primal simplex for
///
///     maximize cost'x  subject to  A x = b,  x >= 0.
///
/// Phase 1 minimizes the sum of one artificial per row. Pricing is
/// Dantzig's largest-coefficient rule with a permanent switch to Bland's
/// rule once pivots stall, which rules out cycling.
LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& cost,
                  const LpOptions& options = {});

}  // namespace elfdesign
