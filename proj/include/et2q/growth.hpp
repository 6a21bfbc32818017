#pragma once

// Hypothetical rule construction and significance-based rule admission.

#include <span>

#include <Eigen/Core>

#include "et2q/density.hpp"
#include "et2q/network.hpp"

namespace et2q {

/// Lower bound on every rule width before the jump grid and determinants.
inline constexpr double kWidthFloor = 1e-3;

struct GrowthConfig {
  double rho = 0.65;     // vigilance
  double delta1 = 0.7;   // lower/upper width ratio

  void validate() const;
};

struct SignificanceEstimate {
  double e_left = 0.0;
  double e_right = 0.0;
  double total = 0.0;
};

/// Jump grid theta^r = r * sigma / ((n_s + 1) / 2), r = 1..n_s, for one
/// feature width.
Eigen::RowVectorXd jump_grid(double sigma, int grades);

/// First rule: centered on x with upper widths equal to the square root of
/// the mixed variance. Consequents start at zero.
Rule make_first_rule(const Eigen::Ref<const Eigen::VectorXd>& x, const GmmDensity& gmm, int class_dim, int grades,
                     double delta1);

/// Candidate rule at x with widths |x - mixed mean|; consequents copied from
/// the winning rule.
Rule make_hypothetical_rule(const Eigen::Ref<const Eigen::VectorXd>& x, const GmmDensity& gmm, const Rule& winner,
                            int grades, double delta1);

/// Closed-form estimate of a rule's statistical contribution under the
/// mixture density, blended by the design-factor norms.
SignificanceEstimate rule_significance(const Rule& rule, const GmmDensity& gmm,
                                       const Eigen::Ref<const Eigen::VectorXd>& q_lower,
                                       const Eigen::Ref<const Eigen::VectorXd>& q_upper);

/// sqrt(pi^{I/2} det(Sigma)^{1/2} N A^T) for one bound, Sigma = diag(widths^2).
double significance_core(const Eigen::Ref<const Eigen::VectorXd>& mean, const Eigen::Ref<const Eigen::VectorXd>& widths,
                         const GmmDensity& gmm);

/// True iff the candidate is positive and at least rho times the summed
/// significance of the existing rules.
bool growth_check(const SignificanceEstimate& candidate, std::span<const SignificanceEstimate> existing, double rho);

}  // namespace et2q
