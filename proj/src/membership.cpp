#include "et2q/membership.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace et2q {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::domain_error(std::string("non-finite ") + what);
  }
}

void require_slope(double beta) {
  require_finite(beta, "slope");
  if (beta <= 0.0) {
    throw std::domain_error("slope factor must be positive");
  }
}

}  // namespace

double logistic(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_slope(double z) {
  const double s = logistic(z);
  return s * (1.0 - s);
}

double qmf_grade_term(double x, double beta, double mean, double jump) {
  const double width = std::abs(jump);
  if (x < mean) {
    return logistic(beta * (x - mean + width));
  }
  return logistic(-beta * (x - mean - width));
}

double qmf_eval(double x, double beta, double mean, std::span<const double> jumps) {
  require_finite(x, "input");
  require_finite(mean, "mean");
  require_slope(beta);
  if (jumps.empty()) {
    throw std::domain_error("quantum membership needs at least one grade");
  }
  double sum = 0.0;
  for (double jump : jumps) {
    require_finite(jump, "jump position");
    sum += qmf_grade_term(x, beta, mean, jump);
  }
  return sum / static_cast<double>(jumps.size());
}

MembershipInterval it2qmf_eval(double x, double beta, double mean, std::span<const double> upper_jumps,
                               std::span<const double> lower_jumps) {
  return {qmf_eval(x, beta, mean, lower_jumps), qmf_eval(x, beta, mean, upper_jumps)};
}

GaussianWidths gaussian_approx_widths(std::span<const double> upper_jumps, std::span<const double> lower_jumps) {
  if (upper_jumps.empty() || lower_jumps.empty()) {
    throw std::domain_error("gaussian approximation needs at least one grade");
  }
  auto min_magnitude = [](std::span<const double> jumps) {
    double m = std::numeric_limits<double>::infinity();
    for (double j : jumps) {
      require_finite(j, "jump position");
      m = std::min(m, std::abs(j));
    }
    return m;
  };
  return {min_magnitude(lower_jumps), min_magnitude(upper_jumps)};
}

double it2gmf_eval(double x, double mean, double sigma) {
  require_finite(x, "input");
  require_finite(mean, "mean");
  if (!(sigma > 0.0)) {
    throw std::domain_error("gaussian width must be positive");
  }
  const double d = x - mean;
  return std::exp(-(d * d) / sigma);
}

double psi_kernel(double x, double beta, double mean, double theta) {
  require_finite(x, "input");
  require_finite(theta, "jump position");
  const double width = std::abs(theta);
  if (x < mean) {
    return -beta * logistic_slope(beta * (x - mean + width));
  }
  return beta * logistic_slope(beta * (x - mean - width));
}

double phi_kernel(double x, double beta, double mean, double theta) {
  require_finite(x, "input");
  require_finite(theta, "jump position");
  const double sign = theta >= 0.0 ? 1.0 : -1.0;
  const double width = std::abs(theta);
  if (x < mean) {
    return sign * beta * logistic_slope(beta * (x - mean + width));
  }
  return sign * beta * logistic_slope(beta * (x - mean - width));
}

}  // namespace et2q
