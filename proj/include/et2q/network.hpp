#pragma once

// Rule base and five-layer forward pass.

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "et2q/membership.hpp"

namespace et2q {

/// Denominator guard for the type-reduction ratio.
inline constexpr double kFiringEpsilon = 1e-12;

/// One fuzzy rule. Consequent matrices are M x (I+1); row o is the weight
/// vector of class o applied to the extended input [1, x_1, ..., x_I].
struct Rule {
  Eigen::VectorXd mean;
  JumpPositionSet jumps;
  Eigen::MatrixXd omega_upper;
  Eigen::MatrixXd omega_lower;

  Rule() = default;
  Rule(Eigen::Index input_dim, Eigen::Index class_dim, Eigen::Index grades);

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index class_dim() const { return omega_upper.rows(); }
  Eigen::Index grades() const { return jumps.grades(); }
};

struct NetworkState {
  std::vector<Rule> rules;
  Eigen::VectorXd q_lower;
  Eigen::VectorXd q_upper;
  double beta = 1.0;
  int grades = 3;
  int input_dim = 0;
  int class_dim = 0;

  NetworkState() = default;
  /// Empty rule base with design factors at their initial 0.3 / 0.7 split.
  NetworkState(int input_dim, int class_dim, int grades, double beta);

  std::size_t rule_count() const { return rules.size(); }
};

struct FiringStrengths {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct IntervalOutput {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  bool degenerate = false;
};

/// Everything the Jacobian needs from a forward pass.
struct ForwardResult {
  int label = 0;  // 1-based class decision
  Eigen::VectorXd outputs;
  FiringStrengths firing;
  IntervalOutput interval;
  Eigen::VectorXd extended_input;
  // K x I per-feature memberships of each rule.
  Eigen::MatrixXd member_lower;
  Eigen::MatrixXd member_upper;
  // K x M consequent values Omega_jo . x_e.
  Eigen::MatrixXd consequent_lower;
  Eigen::MatrixXd consequent_upper;
  double firing_sum = 0.0;
};

Eigen::VectorXd extend_input(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Product T-norm over the per-feature membership intervals.
MembershipInterval fire(const Rule& rule, const Eigen::Ref<const Eigen::VectorXd>& x, double beta);

/// Design-factor type reduction. Throws on an empty rule base; returns zero
/// outputs with the degenerate flag set when total firing is below
/// kFiringEpsilon.
IntervalOutput type_reduce(const NetworkState& state, const FiringStrengths& firing,
                           const Eigen::Ref<const Eigen::VectorXd>& extended_input);

Eigen::VectorXd crisp_output(const Eigen::Ref<const Eigen::VectorXd>& lower,
                             const Eigen::Ref<const Eigen::VectorXd>& upper);

/// 1-based argmax; ties go to the lowest index.
int classify(const Eigen::Ref<const Eigen::VectorXd>& outputs);

ForwardResult forward(const NetworkState& state, const Eigen::Ref<const Eigen::VectorXd>& x);

/// 0-based index of the rule with the highest mean of upper/lower firing.
std::size_t winning_rule(const FiringStrengths& firing);

}  // namespace et2q
