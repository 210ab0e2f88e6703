#pragma once

#include "elfdesign/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace elfdesign {

/// Nonzero vector c defining the linear combination c'theta of interest.
class TargetVector {
 public:
  explicit TargetVector(Eigen::VectorXd c);

  const Eigen::VectorXd& value() const { return c_; }
  int size() const { return static_cast<int>(c_.size()); }

 private:
  Eigen::VectorXd c_;
};

/// Approximate design: distinct support points in ascending order with
/// strictly positive weights summing to one.
class Design {
 public:
  Design() = default;

  /// Validates and sorts. Throws ValidationError when weights are not
  /// positive, do not sum to 1 (within 1e-12) or points are not distinct
  /// by more than `min_gap`.
  Design(std::vector<double> points, std::vector<double> weights, double min_gap = 0.0);

  /// Drops nonpositive weights, merges points closer than `merge_tol`
  /// (weight-averaged location) and rescales the weights to sum to one.
  static Design normalized(const std::vector<double>& points, const std::vector<double>& weights,
                           double merge_tol);

  std::size_t size() const { return points_.size(); }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
};

/// Symmetric PSD information matrix with a cached eigendecomposition.
class InfoMatrix {
 public:
  static constexpr double kDefaultRankTol = 1e-10;

  explicit InfoMatrix(const Eigen::MatrixXd& m, double rank_tol = kDefaultRankTol);

  const Eigen::MatrixXd& matrix() const { return m_; }
  const Eigen::VectorXd& eigenvalues() const { return eigvals_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigvecs_; }
  double rank_tol() const { return tol_; }
  int rank() const { return rank_; }
  int size() const { return static_cast<int>(m_.rows()); }

  /// Orthogonal projector onto the numerical range.
  Eigen::MatrixXd range_projector() const;

 private:
  Eigen::MatrixXd m_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
  double tol_;
  int rank_ = 0;
};

struct PseudoInverse {
  Eigen::MatrixXd matrix;
  int rank = 0;
};

/// Sum over contributions f_l f_l' at (x, theta0).
Eigen::MatrixXd information_at(const ModelSpec& m, double x);

/// Weighted sum of information_at over the support of `d`.
InfoMatrix information_matrix(const ModelSpec& m, const Design& d,
                              double rank_tol = InfoMatrix::kDefaultRankTol);

/// Moore-Penrose inverse, inverting eigenvalues above rank_tol * lambda_max.
PseudoInverse pseudo_inverse(const InfoMatrix& m);

/// True iff c lies in the numerical range of M: |(I - M M+) c| <= 1e-8 |c|.
bool estimable(const TargetVector& c, const InfoMatrix& m);

/// c' M+ c. Throws NotEstimableError when c is outside the range of M.
double criterion(const InfoMatrix& m, const TargetVector& c);
double criterion(const ModelSpec& m, const Design& d, const TargetVector& c);

/// Efficient rounding of design weights to N integer replications, each >= 1.
std::vector<int> apportion(const std::vector<double>& weights, int n);
std::vector<int> apportion(const Design& d, int n);

}  // namespace elfdesign
