#pragma once

// Online learning policy: one pass, rule growth or a DEKF adjustment per
// sample. OnlineModel is a single network (MISO or MIMO); Classifier wraps
// either one MIMO network or M one-vs-rest sub-models.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "et2q/dekf.hpp"
#include "et2q/density.hpp"
#include "et2q/growth.hpp"
#include "et2q/network.hpp"

namespace et2q {

enum class ClassifierMode : std::uint8_t { multi_model = 0, mimo = 1 };

std::string_view to_string(ClassifierMode mode);
ClassifierMode parse_mode(std::string_view text);

struct Hyperparameters {
  double beta = 1.0;
  int grades = 3;
  double rho = 0.65;
  double delta1 = 0.7;
  double eta = 0.001;
  int n_history = 50;
  int gmm_components = 3;
  ClassifierMode mode = ClassifierMode::multi_model;
  std::uint64_t seed = 0;
  bool normalize = false;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
};

enum class StepKind : std::uint8_t { warmup = 0, grew = 1, adjusted = 2 };

std::string_view to_string(StepKind kind);

struct StepReport {
  StepKind kind = StepKind::warmup;
  std::size_t rule_count = 0;
  std::optional<std::size_t> winner;
  Eigen::VectorXd outputs;  // network output before the step, empty for the first rule
  bool degenerate = false;
  bool dekf_applied = false;
  double error_norm = 0.0;
};

struct Prediction {
  int label = 0;  // 1-based
  Eigen::VectorXd scores;
};

/// 1-based class index to a 0/1 vector of length class_count.
Eigen::VectorXd encode_target(int label, int class_count);

class OnlineModel {
 public:
  OnlineModel() = default;
  OnlineModel(int input_dim, int class_dim, const Hyperparameters& hp);

  StepReport train_step(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target);

  /// Forward pass only. Throws std::logic_error on an empty rule base.
  Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const Hyperparameters& hyperparameters() const { return hp_; }
  const NetworkState& network() const { return network_; }
  const DekfState& filter() const { return filter_; }
  const DensityTracker& density() const { return density_; }
  std::uint64_t steps() const { return steps_; }
  std::uint64_t ordering_violations() const { return ordering_violations_; }
  std::size_t rule_count() const { return network_.rule_count(); }

  /// 1-based step numbers at which rules were added; entry k created rule k.
  const std::vector<std::uint64_t>& growth_steps() const { return growth_steps_; }

  struct Parts {
    Hyperparameters hp;
    NetworkState network;
    DekfState filter;
    DensityTracker density;
    std::uint64_t steps = 0;
    std::uint64_t ordering_violations = 0;
    std::vector<std::uint64_t> growth_steps;
  };
  static OnlineModel from_parts(Parts parts);

 private:
  Hyperparameters hp_;
  NetworkState network_;
  DekfState filter_;
  DensityTracker density_;
  std::uint64_t steps_ = 0;
  std::uint64_t ordering_violations_ = 0;
  std::vector<std::uint64_t> growth_steps_;
};

/// Per-feature min-max scaling fitted once, then frozen.
struct MinMaxNormalizer {
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  bool fitted() const { return low.size() > 0; }
  void fit(const std::vector<Eigen::VectorXd>& samples);
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct ClassifierStep {
  StepKind kind = StepKind::warmup;
  std::vector<StepReport> models;  // one per sub-model; empty while buffering
};

struct BufferedSample {
  Eigen::VectorXd x;
  int label = 0;
};

class Classifier {
 public:
  Classifier() = default;
  Classifier(int input_dim, int class_count, const Hyperparameters& hp);

  /// label is 1-based. In multi-model mode sub-model o sees target 1 when
  /// o + 1 == label and 0 otherwise.
  ClassifierStep train(const Eigen::Ref<const Eigen::VectorXd>& x, int label);

  Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// False until at least one sample has reached the networks.
  bool ready() const;

  int input_dim() const { return input_dim_; }
  int class_count() const { return class_count_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  const std::vector<OnlineModel>& models() const { return models_; }
  const MinMaxNormalizer& normalizer() const { return normalizer_; }
  const std::vector<BufferedSample>& pending() const { return pending_; }
  std::vector<std::size_t> rule_counts() const;

  struct Parts {
    int input_dim = 0;
    int class_count = 0;
    Hyperparameters hp;
    std::vector<OnlineModel> models;
    MinMaxNormalizer normalizer;
    std::vector<BufferedSample> pending;
  };
  static Classifier from_parts(Parts parts);

 private:
  ClassifierStep train_normalized(const Eigen::VectorXd& x, int label);

  int input_dim_ = 0;
  int class_count_ = 0;
  Hyperparameters hp_;
  std::vector<OnlineModel> models_;
  MinMaxNormalizer normalizer_;
  std::vector<BufferedSample> pending_;
};

}  // namespace et2q
