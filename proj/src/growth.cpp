#include "et2q/growth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace et2q {

void GrowthConfig::validate() const {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("vigilance must lie in (0, 1]");
  }
  if (!(delta1 > 0.0 && delta1 < 1.0)) {
    throw std::invalid_argument("uncertainty factor must lie in (0, 1)");
  }
}

Eigen::RowVectorXd jump_grid(double sigma, int grades) {
  if (grades < 1) {
    throw std::invalid_argument("jump grid needs at least one grade");
  }
  const double half = (static_cast<double>(grades) + 1.0) / 2.0;
  Eigen::RowVectorXd grid(grades);
  for (int r = 1; r <= grades; ++r) {
    grid(r - 1) = static_cast<double>(r) * sigma / half;
  }
  return grid;
}

namespace {

Rule rule_from_widths(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::VectorXd& upper_width, int class_dim,
                      int grades, double delta1) {
  const Eigen::Index dims = x.size();
  Rule rule(dims, class_dim, grades);
  rule.mean = x;
  for (Eigen::Index i = 0; i < dims; ++i) {
    const double su = std::max(upper_width(i), kWidthFloor);
    const double sl = std::max(delta1 * su, kWidthFloor);
    rule.jumps.upper.row(i) = jump_grid(su, grades);
    rule.jumps.lower.row(i) = jump_grid(sl, grades);
  }
  return rule;
}

}  // namespace

Rule make_first_rule(const Eigen::Ref<const Eigen::VectorXd>& x, const GmmDensity& gmm, int class_dim, int grades,
                     double delta1) {
  gmm.validate();
  if (gmm.dim() != x.size()) {
    throw std::invalid_argument("mixture dimension does not match input");
  }
  const Eigen::VectorXd sigma = mixed_variance(gmm).cwiseSqrt();
  return rule_from_widths(x, sigma, class_dim, grades, delta1);
}

Rule make_hypothetical_rule(const Eigen::Ref<const Eigen::VectorXd>& x, const GmmDensity& gmm, const Rule& winner,
                            int grades, double delta1) {
  if (gmm.dim() != x.size() || winner.input_dim() != x.size()) {
    throw std::invalid_argument("hypothetical rule dimension mismatch");
  }
  const Eigen::VectorXd distance = (x - mixed_mean(gmm)).cwiseAbs();
  Rule rule = rule_from_widths(x, distance, static_cast<int>(winner.class_dim()), grades, delta1);
  rule.omega_upper = winner.omega_upper;
  rule.omega_lower = winner.omega_lower;
  return rule;
}

double significance_core(const Eigen::Ref<const Eigen::VectorXd>& mean, const Eigen::Ref<const Eigen::VectorXd>& widths,
                         const GmmDensity& gmm) {
  const Eigen::Index dims = mean.size();
  const Eigen::ArrayXd w2 = widths.array().square();
  double density_term = 0.0;
  for (std::size_t h = 0; h < gmm.component_count(); ++h) {
    const Eigen::ArrayXd d = (mean - gmm.means[h]).array();
    const Eigen::ArrayXd s = 0.5 * w2 + gmm.variances[h].array();
    density_term += gmm.weights(static_cast<Eigen::Index>(h)) * std::exp(-(d.square() / s).sum());
  }
  const double sqrt_det = widths.prod();
  if (!(sqrt_det > 0.0)) {
    throw std::domain_error("rule width determinant must be positive");
  }
  const double inner = std::pow(std::numbers::pi, 0.5 * static_cast<double>(dims)) * sqrt_det * density_term;
  return std::sqrt(inner);
}

SignificanceEstimate rule_significance(const Rule& rule, const GmmDensity& gmm,
                                       const Eigen::Ref<const Eigen::VectorXd>& q_lower,
                                       const Eigen::Ref<const Eigen::VectorXd>& q_upper) {
  const Eigen::Index dims = rule.input_dim();
  if (gmm.dim() != dims) {
    throw std::invalid_argument("mixture dimension does not match rule");
  }
  Eigen::VectorXd upper_w(dims);
  Eigen::VectorXd lower_w(dims);
  for (Eigen::Index i = 0; i < dims; ++i) {
    const auto w = gaussian_approx_widths(rule.jumps.upper_row(i), rule.jumps.lower_row(i));
    upper_w(i) = std::max(w.upper, kWidthFloor);
    lower_w(i) = std::max(w.lower, kWidthFloor);
  }
  const double core_upper = significance_core(rule.mean, upper_w, gmm);
  const double core_lower = significance_core(rule.mean, lower_w, gmm);
  const double wu = rule.omega_upper.norm();
  const double wl = rule.omega_lower.norm();
  const double ql = q_lower.norm();
  const double qr = q_upper.norm();

  SignificanceEstimate e;
  e.e_left = ql * wu * core_upper + (1.0 - ql) * wl * core_lower;
  e.e_right = qr * wu * core_upper + (1.0 - qr) * wl * core_lower;
  e.total = std::abs(e.e_left) + std::abs(e.e_right);
  return e;
}

bool growth_check(const SignificanceEstimate& candidate, std::span<const SignificanceEstimate> existing, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("vigilance must lie in (0, 1]");
  }
  if (!(candidate.total > 0.0)) {
    return false;
  }
  double sum = 0.0;
  for (const auto& e : existing) sum += e.total;
  return candidate.total >= rho * sum;
}

}  // namespace et2q
