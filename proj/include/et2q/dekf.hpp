#pragma once

// Decoupled extended Kalman filter over the winning rule's parameters.
//
// Each rule owns one Z x Z covariance block; a step touches only the block
// of the winning rule. The flat parameter vector of a rule is laid out as
//
//   [ Omega_lower | Omega_upper | q_lower | q_upper | mean | theta_lower | theta_upper ]
//
// with consequents class-major (o * (I+1) + k) and jump positions
// grade-major (r * I + i). The q segments are shared network-wide.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "et2q/network.hpp"

namespace et2q {

struct ParameterLayout {
  int input_dim = 0;
  int class_dim = 0;
  int grades = 0;

  Eigen::Index omega_lower = 0;
  Eigen::Index omega_upper = 0;
  Eigen::Index q_lower = 0;
  Eigen::Index q_upper = 0;
  Eigen::Index mean = 0;
  Eigen::Index theta_lower = 0;
  Eigen::Index theta_upper = 0;
  Eigen::Index size = 0;

  Eigen::Index omega_count() const { return static_cast<Eigen::Index>(class_dim) * (input_dim + 1); }
  Eigen::Index theta_count() const { return static_cast<Eigen::Index>(input_dim) * grades; }
};

ParameterLayout layout_for(int input_dim, int class_dim, int grades);

Eigen::VectorXd pack_parameters(const Rule& rule, const Eigen::Ref<const Eigen::VectorXd>& q_lower,
                                const Eigen::Ref<const Eigen::VectorXd>& q_upper, const ParameterLayout& layout);

struct UnpackedParameters {
  Rule rule;
  Eigen::VectorXd q_lower;
  Eigen::VectorXd q_upper;
};

/// Inverse of pack_parameters. With clamp_design_factors the q entries are
/// clipped into [0, 1].
UnpackedParameters unpack_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta, const ParameterLayout& layout,
                                     bool clamp_design_factors = false);

/// Z x M matrix of d y_o / d(parameter) for rule `winner`, evaluated from the
/// cached forward pass. A degenerate forward pass yields a zero matrix.
Eigen::MatrixXd jacobian(const NetworkState& state, const ForwardResult& cache, std::size_t winner,
                         const ParameterLayout& layout);

/// G = P H (eta I + H^T P H)^-1. Throws NumericalError when the inner
/// matrix is not positive definite.
Eigen::MatrixXd kalman_gain(const Eigen::Ref<const Eigen::MatrixXd>& covariance,
                            const Eigen::Ref<const Eigen::MatrixXd>& jac, double eta);

/// (I - G H^T) P, symmetrized.
Eigen::MatrixXd covariance_update(const Eigen::Ref<const Eigen::MatrixXd>& covariance,
                                  const Eigen::Ref<const Eigen::MatrixXd>& gain,
                                  const Eigen::Ref<const Eigen::MatrixXd>& jac);

Eigen::VectorXd parameter_update(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                 const Eigen::Ref<const Eigen::MatrixXd>& gain,
                                 const Eigen::Ref<const Eigen::VectorXd>& target,
                                 const Eigen::Ref<const Eigen::VectorXd>& output);

Eigen::MatrixXd init_covariance(Eigen::Index size);

/// Scales every block by (K^2 + 1) / K^2, K = rule count before the addition.
void inflate_covariances(std::vector<Eigen::MatrixXd>& blocks, std::size_t rules_before);

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DekfState {
  ParameterLayout layout;
  std::vector<Eigen::MatrixXd> blocks;
  double eta = 0.001;
};

struct DekfStepResult {
  bool applied = false;
  double error_norm = 0.0;
  // Jump pairs in the winning rule whose magnitude ordering |upper| > |lower|
  // no longer holds after the step.
  std::size_t ordering_violations = 0;
};

/// One DEKF step on rule `winner`: Jacobian, gain, covariance and parameter
/// updates, write-back of rule and design factors.
DekfStepResult dekf_step(NetworkState& state, DekfState& filter, const ForwardResult& cache, std::size_t winner,
                         const Eigen::Ref<const Eigen::VectorXd>& target);

}  // namespace et2q
