#include "et2q/dekf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

namespace et2q {

ParameterLayout layout_for(int input_dim, int class_dim, int grades) {
  if (input_dim < 1 || class_dim < 1 || grades < 1) {
    throw std::invalid_argument("parameter layout needs positive dimensions");
  }
  ParameterLayout l;
  l.input_dim = input_dim;
  l.class_dim = class_dim;
  l.grades = grades;
  const Eigen::Index w = l.omega_count();
  const Eigen::Index t = l.theta_count();
  l.omega_lower = 0;
  l.omega_upper = l.omega_lower + w;
  l.q_lower = l.omega_upper + w;
  l.q_upper = l.q_lower + class_dim;
  l.mean = l.q_upper + class_dim;
  l.theta_lower = l.mean + input_dim;
  l.theta_upper = l.theta_lower + t;
  l.size = l.theta_upper + t;
  return l;
}

namespace {

void check_rule_shape(const Rule& rule, const ParameterLayout& layout) {
  if (rule.input_dim() != layout.input_dim || rule.class_dim() != layout.class_dim ||
      rule.grades() != layout.grades || rule.omega_lower.rows() != layout.class_dim ||
      rule.omega_upper.cols() != layout.input_dim + 1 || rule.jumps.lower.rows() != layout.input_dim ||
      rule.jumps.lower.cols() != layout.grades) {
    throw std::invalid_argument("rule shape does not match parameter layout");
  }
}

}  // namespace

Eigen::VectorXd pack_parameters(const Rule& rule, const Eigen::Ref<const Eigen::VectorXd>& q_lower,
                                const Eigen::Ref<const Eigen::VectorXd>& q_upper, const ParameterLayout& layout) {
  check_rule_shape(rule, layout);
  if (q_lower.size() != layout.class_dim || q_upper.size() != layout.class_dim) {
    throw std::invalid_argument("design factor length does not match parameter layout");
  }
  const int dims = layout.input_dim;
  const int cols = dims + 1;
  Eigen::VectorXd theta(layout.size);
  for (int o = 0; o < layout.class_dim; ++o) {
    for (int k = 0; k < cols; ++k) {
      theta(layout.omega_lower + o * cols + k) = rule.omega_lower(o, k);
      theta(layout.omega_upper + o * cols + k) = rule.omega_upper(o, k);
    }
  }
  theta.segment(layout.q_lower, layout.class_dim) = q_lower;
  theta.segment(layout.q_upper, layout.class_dim) = q_upper;
  theta.segment(layout.mean, dims) = rule.mean;
  for (int r = 0; r < layout.grades; ++r) {
    for (int i = 0; i < dims; ++i) {
      theta(layout.theta_lower + r * dims + i) = rule.jumps.lower(i, r);
      theta(layout.theta_upper + r * dims + i) = rule.jumps.upper(i, r);
    }
  }
  return theta;
}

UnpackedParameters unpack_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta, const ParameterLayout& layout,
                                     bool clamp_design_factors) {
  if (theta.size() != layout.size) {
    throw std::invalid_argument("parameter vector length " + std::to_string(theta.size()) + " != " +
                                std::to_string(layout.size));
  }
  const int dims = layout.input_dim;
  const int cols = dims + 1;
  UnpackedParameters out{Rule(dims, layout.class_dim, layout.grades), theta.segment(layout.q_lower, layout.class_dim),
                         theta.segment(layout.q_upper, layout.class_dim)};
  for (int o = 0; o < layout.class_dim; ++o) {
    for (int k = 0; k < cols; ++k) {
      out.rule.omega_lower(o, k) = theta(layout.omega_lower + o * cols + k);
      out.rule.omega_upper(o, k) = theta(layout.omega_upper + o * cols + k);
    }
  }
  out.rule.mean = theta.segment(layout.mean, dims);
  for (int r = 0; r < layout.grades; ++r) {
    for (int i = 0; i < dims; ++i) {
      out.rule.jumps.lower(i, r) = theta(layout.theta_lower + r * dims + i);
      out.rule.jumps.upper(i, r) = theta(layout.theta_upper + r * dims + i);
    }
  }
  if (clamp_design_factors) {
    out.q_lower = out.q_lower.cwiseMax(0.0).cwiseMin(1.0);
    out.q_upper = out.q_upper.cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

Eigen::MatrixXd jacobian(const NetworkState& state, const ForwardResult& cache, std::size_t winner,
                         const ParameterLayout& layout) {
  const std::size_t k = state.rules.size();
  if (winner >= k) {
    throw std::out_of_range("winning rule index out of range");
  }
  if (static_cast<std::size_t>(cache.firing.lower.size()) != k) {
    throw std::invalid_argument("forward cache does not match rule base");
  }
  const int dims = layout.input_dim;
  const int classes = layout.class_dim;
  const int grades = layout.grades;
  const int cols = dims + 1;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(layout.size, classes);
  if (cache.interval.degenerate) {
    return jac;
  }

  const Rule& rule = state.rules[winner];
  const auto w = static_cast<Eigen::Index>(winner);
  const double s = cache.firing_sum;
  const double rl = cache.firing.lower(w);
  const double ru = cache.firing.upper(w);
  const Eigen::VectorXd& xe = cache.extended_input;

  // Firing derivative pieces common to every class: the product of the
  // other features' memberships times the per-feature kernel average.
  Eigen::VectorXd others_lower(dims);
  Eigen::VectorXd others_upper(dims);
  for (int i = 0; i < dims; ++i) {
    double pl = 1.0;
    double pu = 1.0;
    for (int ip = 0; ip < dims; ++ip) {
      if (ip == i) continue;
      pl *= cache.member_lower(w, ip);
      pu *= cache.member_upper(w, ip);
    }
    others_lower(i) = pl;
    others_upper(i) = pu;
  }
  const double inv_grades = 1.0 / static_cast<double>(grades);
  Eigen::VectorXd dlower_dmean(dims);
  Eigen::VectorXd dupper_dmean(dims);
  Eigen::MatrixXd dlower_dtheta(dims, grades);
  Eigen::MatrixXd dupper_dtheta(dims, grades);
  const Eigen::VectorXd x = xe.tail(dims);
  for (int i = 0; i < dims; ++i) {
    double psi_l = 0.0;
    double psi_u = 0.0;
    for (int r = 0; r < grades; ++r) {
      const double tl = rule.jumps.lower(i, r);
      const double tu = rule.jumps.upper(i, r);
      psi_l += psi_kernel(x(i), state.beta, rule.mean(i), tl);
      psi_u += psi_kernel(x(i), state.beta, rule.mean(i), tu);
      dlower_dtheta(i, r) = others_lower(i) * inv_grades * phi_kernel(x(i), state.beta, rule.mean(i), tl);
      dupper_dtheta(i, r) = others_upper(i) * inv_grades * phi_kernel(x(i), state.beta, rule.mean(i), tu);
    }
    dlower_dmean(i) = others_lower(i) * inv_grades * psi_l;
    dupper_dmean(i) = others_upper(i) * inv_grades * psi_u;
  }

  for (int o = 0; o < classes; ++o) {
    const double ql = state.q_lower(o);
    const double qr = state.q_upper(o);
    const double yl = cache.interval.lower(o);
    const double yr = cache.interval.upper(o);
    const double cl = cache.consequent_lower(w, o);
    const double cu = cache.consequent_upper(w, o);

    const double lower_weight = ((1.0 - ql) * rl + ql * ru) / s;
    const double upper_weight = ((1.0 - qr) * rl + qr * ru) / s;
    for (int kk = 0; kk < cols; ++kk) {
      jac(layout.omega_lower + o * cols + kk, o) = lower_weight * xe(kk);
      jac(layout.omega_upper + o * cols + kk, o) = upper_weight * xe(kk);
    }

    const double al = cache.firing.lower.dot(cache.consequent_lower.col(o));
    const double bl = cache.firing.upper.dot(cache.consequent_lower.col(o));
    const double au = cache.firing.lower.dot(cache.consequent_upper.col(o));
    const double bu = cache.firing.upper.dot(cache.consequent_upper.col(o));
    jac(layout.q_lower + o, o) = (bl - al) / s;
    jac(layout.q_upper + o, o) = (bu - au) / s;

    // dy_o/dR for the winning rule, summed over both output endpoints.
    const double g_lower = ((1.0 - ql) * cl - yl) / s + ((1.0 - qr) * cu - yr) / s;
    const double g_upper = (ql * cl - yl) / s + (qr * cu - yr) / s;
    for (int i = 0; i < dims; ++i) {
      jac(layout.mean + i, o) = g_lower * dlower_dmean(i) + g_upper * dupper_dmean(i);
      for (int r = 0; r < grades; ++r) {
        jac(layout.theta_lower + r * dims + i, o) = g_lower * dlower_dtheta(i, r);
        jac(layout.theta_upper + r * dims + i, o) = g_upper * dupper_dtheta(i, r);
      }
    }
  }
  return jac;
}

Eigen::MatrixXd kalman_gain(const Eigen::Ref<const Eigen::MatrixXd>& covariance,
                            const Eigen::Ref<const Eigen::MatrixXd>& jac, double eta) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != jac.rows()) {
    throw std::invalid_argument("kalman gain shape mismatch");
  }
  if (!(eta > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  const Eigen::MatrixXd ph = covariance * jac;
  Eigen::MatrixXd inner = jac.transpose() * ph;
  inner.diagonal().array() += eta;
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "innovation matrix is not positive definite (diag min " << inner.diagonal().minCoeff() << ")";
    throw NumericalError(msg.str());
  }
  // G = PH * inner^-1  <=>  inner * G^T = (PH)^T, inner symmetric.
  return llt.solve(ph.transpose()).transpose();
}

Eigen::MatrixXd covariance_update(const Eigen::Ref<const Eigen::MatrixXd>& covariance,
                                  const Eigen::Ref<const Eigen::MatrixXd>& gain,
                                  const Eigen::Ref<const Eigen::MatrixXd>& jac) {
  if (gain.rows() != covariance.rows() || jac.rows() != covariance.rows() || gain.cols() != jac.cols()) {
    throw std::invalid_argument("covariance update shape mismatch");
  }
  Eigen::MatrixXd next = covariance - gain * (jac.transpose() * covariance);
  return 0.5 * (next + next.transpose());
}

Eigen::VectorXd parameter_update(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                 const Eigen::Ref<const Eigen::MatrixXd>& gain,
                                 const Eigen::Ref<const Eigen::VectorXd>& target,
                                 const Eigen::Ref<const Eigen::VectorXd>& output) {
  if (gain.rows() != theta.size() || gain.cols() != target.size() || target.size() != output.size()) {
    throw std::invalid_argument("parameter update shape mismatch");
  }
  return theta + gain * (target - output);
}

Eigen::MatrixXd init_covariance(Eigen::Index size) { return Eigen::MatrixXd::Identity(size, size); }

void inflate_covariances(std::vector<Eigen::MatrixXd>& blocks, std::size_t rules_before) {
  if (rules_before == 0) {
    throw std::invalid_argument("covariance inflation needs at least one existing rule");
  }
  const double k2 = static_cast<double>(rules_before) * static_cast<double>(rules_before);
  const double factor = (k2 + 1.0) / k2;
  for (auto& p : blocks) p *= factor;
}

DekfStepResult dekf_step(NetworkState& state, DekfState& filter, const ForwardResult& cache, std::size_t winner,
                         const Eigen::Ref<const Eigen::VectorXd>& target) {
  DekfStepResult result;
  result.error_norm = (target - cache.outputs).norm();
  if (cache.interval.degenerate) {
    return result;
  }
  const ParameterLayout& layout = filter.layout;
  Eigen::MatrixXd& block = filter.blocks.at(winner);
  const Eigen::MatrixXd jac = jacobian(state, cache, winner, layout);
  Eigen::MatrixXd gain;
  try {
    gain = kalman_gain(block, jac, filter.eta);
  } catch (const NumericalError& e) {
    spdlog::warn("skipping DEKF update on rule {}: {}", winner, e.what());
    return result;
  }
  const Eigen::VectorXd theta = pack_parameters(state.rules[winner], state.q_lower, state.q_upper, layout);
  const Eigen::VectorXd next = parameter_update(theta, gain, target, cache.outputs);
  block = covariance_update(block, gain, jac);

  auto unpacked = unpack_parameters(next, layout, true);
  state.rules[winner] = std::move(unpacked.rule);
  state.q_lower = std::move(unpacked.q_lower);
  state.q_upper = std::move(unpacked.q_upper);

  const auto& jumps = state.rules[winner].jumps;
  result.ordering_violations = static_cast<std::size_t>(
      (jumps.upper.array().abs() <= jumps.lower.array().abs()).count());
  result.applied = true;
  return result;
}

}  // namespace et2q
