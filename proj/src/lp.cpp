#include "elfdesign/lp.hpp"

#include "elfdesign/error.hpp"

#include <cmath>
#include <limits>

namespace elfdesign {
namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
 public:
  Simplex(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const LpOptions& opt)
      : m_(static_cast<int>(a.rows())), n_(static_cast<int>(a.cols())), opt_(opt) {
    // Columns: [structural n | artificial m | rhs]; row m is the objective.
    t_ = Tableau::Zero(m_ + 1, n_ + m_ + 1);
    sign_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      sign_[i] = b[i] < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign_[i] * a.row(i);
      t_(i, n_ + i) = 1.0;
      t_(i, rhs()) = sign_[i] * b[i];
    }
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
    scale_ = std::max(1.0, a.cwiseAbs().maxCoeff());
  }

  int rhs() const { return n_ + m_; }

  // Objective row r_j = c_B B^-1 A_j - c_j for the given column costs.
  void price(const Eigen::VectorXd& col_cost) {
    t_.row(m_).setZero();
    for (int i = 0; i < m_; ++i) {
      double cb = col_cost[basis_[i]];
      if (cb != 0.0) t_.row(m_) += cb * t_.row(i);
    }
    for (int j = 0; j < n_ + m_; ++j) t_(m_, j) -= col_cost[j];
  }

  // Runs simplex iterations on the current objective row. Columns j with
  // allowed[j] == false never enter.
  LpResult::Status iterate(const std::vector<bool>& allowed, int& iterations) {
    bool bland = false;
    int streak = 0;
    const double dtol = opt_.pivot_tol * scale_;
    for (;;) {
      if (iterations >= opt_.max_iterations) return LpResult::Status::kIterationLimit;
      int enter = -1;
      double best = -dtol;
      for (int j = 0; j < n_ + m_; ++j) {
        if (!allowed[j]) continue;
        double r = t_(m_, j);
        if (bland) {
          if (r < -dtol) {
            enter = j;
            break;
          }
        } else if (r < best) {
          best = r;
          enter = j;
        }
      }
      if (enter < 0) return LpResult::Status::kOptimal;

      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        double aij = t_(i, enter);
        if (aij <= opt_.pivot_tol) continue;
        double q = t_(i, rhs()) / aij;
        if (leave < 0) {
          ratio = q;
          leave = i;
          continue;
        }
        const double slack = 1e-14 * std::max(1.0, std::abs(ratio));
        if (q < ratio - slack || (q <= ratio + slack && basis_[i] < basis_[leave])) {
          ratio = std::min(ratio, q);
          leave = i;
        }
      }
      if (leave < 0) return LpResult::Status::kUnbounded;

      if (t_(leave, rhs()) <= opt_.feasibility_tol) {
        if (++streak >= opt_.degenerate_streak) bland = true;
      } else {
        streak = 0;
      }
      pivot(leave, enter);
      ++iterations;
    }
  }

  void pivot(int row, int col) {
    const double piv = t_(row, col);
    t_.row(row) /= piv;
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    t_(row, col) = 1.0;
    basis_[row] = col;
  }

  // Pivots zero-level artificials out of the basis where a structural
  // column can replace them; rows where none can are redundant.
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      int best = -1;
      double mag = opt_.pivot_tol * scale_;
      for (int j = 0; j < n_; ++j) {
        if (std::abs(t_(i, j)) > mag) {
          mag = std::abs(t_(i, j));
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

  LpResult finish(LpResult::Status status, const Eigen::VectorXd& cost, int iterations) const {
    LpResult res;
    res.status = status;
    res.iterations = iterations;
    res.x = Eigen::VectorXd::Zero(n_);
    res.basis.resize(m_);
    for (int i = 0; i < m_; ++i) {
      int bj = basis_[i];
      if (bj < n_) {
        res.x[bj] = std::max(0.0, t_(i, rhs()));
        res.basis[i] = bj;
      } else {
        res.basis[i] = -1;
      }
    }
    res.objective = cost.dot(res.x);
    // y = c_B B^-1; the artificial block of row m holds c_B B^-1 I - 0.
    res.duals.resize(m_);
    for (int i = 0; i < m_; ++i) res.duals[i] = sign_[i] * t_(m_, n_ + i);
    return res;
  }

  double phase_one_infeasibility() const { return -t_(m_, rhs()); }

 private:
  int m_, n_;
  LpOptions opt_;
  Tableau t_;
  std::vector<int> basis_;
  std::vector<double> sign_;
  double scale_ = 1.0;
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& cost,
                  const LpOptions& options) {
  if (a.rows() != b.size() || a.cols() != cost.size())
    throw ValidationError("solve_lp: inconsistent dimensions");
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());

  Simplex s(a, b, options);
  int iterations = 0;

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setConstant(-1.0);
  s.price(phase1);
  std::vector<bool> allowed(n + m, true);
  auto status = s.iterate(allowed, iterations);
  if (status == LpResult::Status::kIterationLimit) return s.finish(status, cost, iterations);
  double bscale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (s.phase_one_infeasibility() > options.feasibility_tol * bscale)
    return s.finish(LpResult::Status::kInfeasible, cost, iterations);

  s.expel_artificials();
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = cost;
  s.price(phase2);
  for (int j = n; j < n + m; ++j) allowed[j] = false;
  status = s.iterate(allowed, iterations);
  return s.finish(status, cost, iterations);
}

}  // namespace elfdesign
