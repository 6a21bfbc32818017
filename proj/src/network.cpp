#include "et2q/network.hpp"

#include <stdexcept>
#include <string>

namespace et2q {

Rule::Rule(Eigen::Index input_dim, Eigen::Index class_dim, Eigen::Index grades)
    : mean(Eigen::VectorXd::Zero(input_dim)),
      jumps(input_dim, grades),
      omega_upper(Eigen::MatrixXd::Zero(class_dim, input_dim + 1)),
      omega_lower(Eigen::MatrixXd::Zero(class_dim, input_dim + 1)) {}

NetworkState::NetworkState(int input_dim_, int class_dim_, int grades_, double beta_)
    : q_lower(Eigen::VectorXd::Constant(class_dim_, 0.3)),
      q_upper(Eigen::VectorXd::Constant(class_dim_, 0.7)),
      beta(beta_),
      grades(grades_),
      input_dim(input_dim_),
      class_dim(class_dim_) {
  if (input_dim_ < 1 || class_dim_ < 1 || grades_ < 1) {
    throw std::invalid_argument("network dimensions must be at least 1");
  }
  if (!(beta_ > 0.0)) {
    throw std::invalid_argument("slope factor must be positive");
  }
}

Eigen::VectorXd extend_input(const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd xe(x.size() + 1);
  xe(0) = 1.0;
  xe.tail(x.size()) = x;
  return xe;
}

MembershipInterval fire(const Rule& rule, const Eigen::Ref<const Eigen::VectorXd>& x, double beta) {
  if (x.size() != rule.input_dim()) {
    throw std::invalid_argument("input dimension does not match rule");
  }
  MembershipInterval out{1.0, 1.0};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto m = it2qmf_eval(x(i), beta, rule.mean(i), rule.jumps.upper_row(i), rule.jumps.lower_row(i));
    out.lower *= m.lower;
    out.upper *= m.upper;
  }
  return out;
}

IntervalOutput type_reduce(const NetworkState& state, const FiringStrengths& firing,
                           const Eigen::Ref<const Eigen::VectorXd>& extended_input) {
  const auto k = state.rules.size();
  if (k == 0) {
    throw std::logic_error("empty rule base");
  }
  if (static_cast<std::size_t>(firing.lower.size()) != k || static_cast<std::size_t>(firing.upper.size()) != k) {
    throw std::invalid_argument("firing strengths do not match rule count");
  }
  const int m = state.class_dim;
  IntervalOutput out{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), false};
  const double denom = firing.lower.sum() + firing.upper.sum();
  if (!(denom >= kFiringEpsilon)) {
    out.degenerate = true;
    return out;
  }
  Eigen::VectorXd lower_by_lower = Eigen::VectorXd::Zero(m);  // sum_j R_lower * Omega_lower x_e
  Eigen::VectorXd lower_by_upper = Eigen::VectorXd::Zero(m);  // sum_j R_upper * Omega_lower x_e
  Eigen::VectorXd upper_by_lower = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd upper_by_upper = Eigen::VectorXd::Zero(m);
  for (std::size_t j = 0; j < k; ++j) {
    const Rule& rule = state.rules[j];
    const Eigen::VectorXd cl = rule.omega_lower * extended_input;
    const Eigen::VectorXd cu = rule.omega_upper * extended_input;
    lower_by_lower += firing.lower(j) * cl;
    lower_by_upper += firing.upper(j) * cl;
    upper_by_lower += firing.lower(j) * cu;
    upper_by_upper += firing.upper(j) * cu;
  }
  const auto& ql = state.q_lower.array();
  const auto& qr = state.q_upper.array();
  out.lower = (((1.0 - ql) * lower_by_lower.array() + ql * lower_by_upper.array()) / denom).matrix();
  out.upper = (((1.0 - qr) * upper_by_lower.array() + qr * upper_by_upper.array()) / denom).matrix();
  return out;
}

Eigen::VectorXd crisp_output(const Eigen::Ref<const Eigen::VectorXd>& lower,
                             const Eigen::Ref<const Eigen::VectorXd>& upper) {
  if (lower.size() != upper.size()) {
    throw std::invalid_argument("output bounds differ in length");
  }
  return lower + upper;
}

int classify(const Eigen::Ref<const Eigen::VectorXd>& outputs) {
  if (outputs.size() == 0) {
    throw std::invalid_argument("cannot classify an empty output vector");
  }
  Eigen::Index best = 0;
  for (Eigen::Index o = 1; o < outputs.size(); ++o) {
    if (outputs(o) > outputs(best)) best = o;
  }
  return static_cast<int>(best) + 1;
}

ForwardResult forward(const NetworkState& state, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto k = static_cast<Eigen::Index>(state.rules.size());
  if (k == 0) {
    throw std::logic_error("empty rule base");
  }
  if (x.size() != state.input_dim) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, network expects " +
                                std::to_string(state.input_dim));
  }
  const Eigen::Index dims = state.input_dim;
  ForwardResult r;
  r.extended_input = extend_input(x);
  r.member_lower.resize(k, dims);
  r.member_upper.resize(k, dims);
  r.firing.lower.resize(k);
  r.firing.upper.resize(k);
  r.consequent_lower.resize(k, state.class_dim);
  r.consequent_upper.resize(k, state.class_dim);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Rule& rule = state.rules[static_cast<std::size_t>(j)];
    double lo = 1.0;
    double up = 1.0;
    for (Eigen::Index i = 0; i < dims; ++i) {
      const auto m = it2qmf_eval(x(i), state.beta, rule.mean(i), rule.jumps.upper_row(i), rule.jumps.lower_row(i));
      r.member_lower(j, i) = m.lower;
      r.member_upper(j, i) = m.upper;
      lo *= m.lower;
      up *= m.upper;
    }
    r.firing.lower(j) = lo;
    r.firing.upper(j) = up;
    r.consequent_lower.row(j) = (rule.omega_lower * r.extended_input).transpose();
    r.consequent_upper.row(j) = (rule.omega_upper * r.extended_input).transpose();
  }
  r.firing_sum = r.firing.lower.sum() + r.firing.upper.sum();
  r.interval = type_reduce(state, r.firing, r.extended_input);
  r.outputs = crisp_output(r.interval.lower, r.interval.upper);
  r.label = classify(r.outputs);
  return r;
}

std::size_t winning_rule(const FiringStrengths& firing) {
  const Eigen::Index k = firing.lower.size();
  if (k == 0 || firing.upper.size() != k) {
    throw std::invalid_argument("winning rule needs a non-empty firing vector");
  }
  Eigen::Index best = 0;
  double best_avg = 0.5 * (firing.upper(0) + firing.lower(0));
  for (Eigen::Index j = 1; j < k; ++j) {
    const double avg = 0.5 * (firing.upper(j) + firing.lower(j));
    if (avg > best_avg) {
      best = j;
      best_avg = avg;
    }
  }
  return static_cast<std::size_t>(best);
}

}  // namespace et2q
