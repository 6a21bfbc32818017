#pragma once

// Interval type-2 quantum membership functions.
//
// A quantum membership function (QMF) is the average of n_s sigmoid pairs
// whose transition points sit at |theta^r| on either side of the mean. The
// interval type-2 variant keeps two jump sets (upper, lower); evaluating both
// yields a membership interval. All functions here are pure.

#include <span>
#include <utility>

#include <Eigen/Core>

namespace et2q {

/// Row-major so that the jump grid of one feature is a contiguous span.
using JumpMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Upper and lower jump positions, one row per input feature and one column
/// per grade.
struct JumpPositionSet {
  JumpMatrix upper;
  JumpMatrix lower;

  JumpPositionSet() = default;
  JumpPositionSet(Eigen::Index features, Eigen::Index grades)
      : upper(JumpMatrix::Zero(features, grades)), lower(JumpMatrix::Zero(features, grades)) {}

  Eigen::Index features() const { return upper.rows(); }
  Eigen::Index grades() const { return upper.cols(); }

  std::span<const double> upper_row(Eigen::Index i) const {
    return {upper.row(i).data(), static_cast<std::size_t>(upper.cols())};
  }
  std::span<const double> lower_row(Eigen::Index i) const {
    return {lower.row(i).data(), static_cast<std::size_t>(lower.cols())};
  }
};

struct MembershipInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct GaussianWidths {
  double lower = 0.0;
  double upper = 0.0;
};

/// Numerically stable logistic function.
double logistic(double z);

/// Derivative of the logistic function, sigma(z) * (1 - sigma(z)).
double logistic_slope(double z);

/// Type-1 QMF: mean of the per-grade sigmoid terms. The rising branch is used
/// for x < mean and the falling branch for x >= mean.
double qmf_eval(double x, double beta, double mean, std::span<const double> jumps);

/// Single per-grade term of qmf_eval.
double qmf_grade_term(double x, double beta, double mean, double jump);

/// Lower membership from the lower jumps, upper from the upper jumps.
MembershipInterval it2qmf_eval(double x, double beta, double mean, std::span<const double> upper_jumps,
                               std::span<const double> lower_jumps);

/// Widths of the Gaussian that stands in for the QMF during significance
/// estimation: the smallest jump magnitude of each bound.
GaussianWidths gaussian_approx_widths(std::span<const double> upper_jumps, std::span<const double> lower_jumps);

/// exp(-(x - mean)^2 / sigma). Note sigma, not sigma^2.
double it2gmf_eval(double x, double mean, double sigma);

/// d/d(mean) of qmf_grade_term.
double psi_kernel(double x, double beta, double mean, double theta);

/// d/d(theta) of qmf_grade_term. theta == 0 takes the theta >= 0 branch.
double phi_kernel(double x, double beta, double mean, double theta);

}  // namespace et2q
