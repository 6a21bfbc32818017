#include "et2q/learner.hpp"

#include <cmath>
#include <stdexcept>

namespace et2q {

std::string_view to_string(ClassifierMode mode) {
  return mode == ClassifierMode::mimo ? "mimo" : "mm";
}

ClassifierMode parse_mode(std::string_view text) {
  if (text == "mm") return ClassifierMode::multi_model;
  if (text == "mimo") return ClassifierMode::mimo;
  throw std::invalid_argument("unknown classifier mode '" + std::string(text) + "' (expected mm or mimo)");
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::grew:
      return "grew";
    case StepKind::adjusted:
      return "adjusted";
    case StepKind::warmup:
      break;
  }
  return "warmup";
}

void Hyperparameters::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta must be a positive finite number");
  if (grades < 1) fail("grades (n_s) must be at least 1");
  if (!(rho > 0.0 && rho <= 1.0)) fail("rho must lie in (0, 1]");
  if (!(delta1 > 0.0 && delta1 < 1.0)) fail("delta1 must lie in (0, 1)");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be a positive finite number");
  if (n_history < 1) fail("n_history must be at least 1");
  if (gmm_components < 1) fail("gmm_components must be at least 1");
}

Eigen::VectorXd encode_target(int label, int class_count) {
  if (class_count < 1 || label < 1 || label > class_count) {
    throw std::out_of_range("class label " + std::to_string(label) + " outside 1.." + std::to_string(class_count));
  }
  Eigen::VectorXd t = Eigen::VectorXd::Zero(class_count);
  t(label - 1) = 1.0;
  return t;
}

OnlineModel::OnlineModel(int input_dim, int class_dim, const Hyperparameters& hp)
    : hp_(hp),
      network_(input_dim, class_dim, hp.grades, hp.beta),
      density_(static_cast<std::size_t>(hp.n_history), input_dim, static_cast<std::size_t>(hp.gmm_components),
               hp.seed) {
  hp_.validate();
  filter_.layout = layout_for(input_dim, class_dim, hp.grades);
  filter_.eta = hp.eta;
}

StepReport OnlineModel::train_step(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   const Eigen::Ref<const Eigen::VectorXd>& target) {
  if (x.size() != network_.input_dim) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(network_.input_dim));
  }
  if (target.size() != network_.class_dim) {
    throw std::invalid_argument("target length does not match model outputs");
  }
  if (!x.allFinite() || !target.allFinite()) {
    throw std::domain_error("non-finite training sample");
  }
  ++steps_;
  density_.observe(x);
  const GmmDensity& gmm = density_.current();

  StepReport report;
  if (network_.rules.empty()) {
    network_.rules.push_back(make_first_rule(x, gmm, network_.class_dim, network_.grades, hp_.delta1));
    filter_.blocks.push_back(init_covariance(filter_.layout.size));
    growth_steps_.push_back(steps_);
    report.kind = StepKind::grew;
    report.rule_count = 1;
    return report;
  }

  const ForwardResult fwd = forward(network_, x);
  const std::size_t winner = winning_rule(fwd.firing);
  report.winner = winner;
  report.outputs = fwd.outputs;
  report.degenerate = fwd.interval.degenerate;
  report.error_norm = (target - fwd.outputs).norm();

  Rule candidate = make_hypothetical_rule(x, gmm, network_.rules[winner], network_.grades, hp_.delta1);
  std::vector<SignificanceEstimate> existing;
  existing.reserve(network_.rules.size());
  for (const Rule& r : network_.rules) {
    existing.push_back(rule_significance(r, gmm, network_.q_lower, network_.q_upper));
  }
  const auto cand = rule_significance(candidate, gmm, network_.q_lower, network_.q_upper);

  if (growth_check(cand, existing, hp_.rho)) {
    inflate_covariances(filter_.blocks, network_.rules.size());
    network_.rules.push_back(std::move(candidate));
    filter_.blocks.push_back(init_covariance(filter_.layout.size));
    growth_steps_.push_back(steps_);
    report.kind = StepKind::grew;
  } else {
    const auto step = dekf_step(network_, filter_, fwd, winner, target);
    ordering_violations_ += step.ordering_violations;
    report.kind = StepKind::adjusted;
    report.dekf_applied = step.applied;
  }
  report.rule_count = network_.rules.size();
  return report;
}

Prediction OnlineModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const ForwardResult fwd = forward(network_, x);
  return {fwd.label, fwd.outputs};
}

OnlineModel OnlineModel::from_parts(Parts parts) {
  parts.hp.validate();
  const auto& n = parts.network;
  if (parts.filter.blocks.size() != n.rules.size()) {
    throw std::invalid_argument("covariance block count does not match rule count");
  }
  const auto expected = layout_for(n.input_dim, n.class_dim, n.grades);
  if (parts.filter.layout.size != expected.size) {
    throw std::invalid_argument("parameter layout does not match network dimensions");
  }
  for (const auto& b : parts.filter.blocks) {
    if (b.rows() != expected.size || b.cols() != expected.size) {
      throw std::invalid_argument("covariance block has the wrong size");
    }
  }
  for (const auto& r : n.rules) {
    if (r.input_dim() != n.input_dim || r.class_dim() != n.class_dim || r.grades() != n.grades ||
        r.omega_lower.rows() != n.class_dim || r.omega_upper.cols() != n.input_dim + 1 ||
        r.omega_lower.cols() != n.input_dim + 1 || r.jumps.lower.rows() != n.input_dim ||
        r.jumps.lower.cols() != n.grades) {
      throw std::invalid_argument("rule shape does not match network dimensions");
    }
  }
  OnlineModel m;
  m.hp_ = parts.hp;
  m.network_ = std::move(parts.network);
  m.filter_ = std::move(parts.filter);
  m.density_ = std::move(parts.density);
  m.steps_ = parts.steps;
  m.ordering_violations_ = parts.ordering_violations;
  m.growth_steps_ = std::move(parts.growth_steps);
  return m;
}

void MinMaxNormalizer::fit(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("cannot fit normalizer on no samples");
  }
  low = samples.front();
  high = samples.front();
  for (const auto& s : samples) {
    low = low.cwiseMin(s);
    high = high.cwiseMax(s);
  }
}

Eigen::VectorXd MinMaxNormalizer::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (!fitted()) return x;
  Eigen::VectorXd range = high - low;
  for (Eigen::Index i = 0; i < range.size(); ++i) {
    if (!(range(i) > 1e-12)) range(i) = 1.0;
  }
  return ((x - low).array() / range.array()).matrix();
}

Classifier::Classifier(int input_dim, int class_count, const Hyperparameters& hp)
    : input_dim_(input_dim), class_count_(class_count), hp_(hp) {
  hp_.validate();
  if (input_dim < 1 || class_count < 1) {
    throw std::invalid_argument("classifier needs at least one feature and one class");
  }
  if (hp_.mode == ClassifierMode::mimo) {
    models_.emplace_back(input_dim, class_count, hp_);
  } else {
    models_.reserve(static_cast<std::size_t>(class_count));
    for (int o = 0; o < class_count; ++o) models_.emplace_back(input_dim, 1, hp_);
  }
}

ClassifierStep Classifier::train_normalized(const Eigen::VectorXd& x, int label) {
  ClassifierStep step;
  step.models.reserve(models_.size());
  if (hp_.mode == ClassifierMode::mimo) {
    step.models.push_back(models_.front().train_step(x, encode_target(label, class_count_)));
  } else {
    Eigen::VectorXd t(1);
    for (int o = 0; o < class_count_; ++o) {
      t(0) = (o + 1 == label) ? 1.0 : 0.0;
      step.models.push_back(models_[static_cast<std::size_t>(o)].train_step(x, t));
    }
  }
  step.kind = StepKind::adjusted;
  for (const auto& r : step.models) {
    if (r.kind == StepKind::grew) step.kind = StepKind::grew;
  }
  return step;
}

ClassifierStep Classifier::train(const Eigen::Ref<const Eigen::VectorXd>& x, int label) {
  if (x.size() != input_dim_) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, classifier expects " +
                                std::to_string(input_dim_));
  }
  if (label < 1 || label > class_count_) {
    throw std::out_of_range("class label " + std::to_string(label) + " outside 1.." + std::to_string(class_count_));
  }
  if (!hp_.normalize) {
    return train_normalized(x, label);
  }
  if (!normalizer_.fitted()) {
    pending_.push_back({x, label});
    if (pending_.size() < static_cast<std::size_t>(hp_.n_history)) {
      return {};
    }
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(pending_.size());
    for (const auto& p : pending_) xs.push_back(p.x);
    normalizer_.fit(xs);
    ClassifierStep last;
    for (const auto& p : pending_) last = train_normalized(normalizer_.apply(p.x), p.label);
    pending_.clear();
    return last;
  }
  return train_normalized(normalizer_.apply(x), label);
}

bool Classifier::ready() const {
  for (const auto& m : models_) {
    if (m.rule_count() == 0) return false;
  }
  return !models_.empty();
}

Prediction Classifier::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (!ready()) {
    throw std::logic_error("empty rule base: classifier has not been trained");
  }
  const Eigen::VectorXd z = normalizer_.apply(x);
  if (hp_.mode == ClassifierMode::mimo) {
    return models_.front().predict(z);
  }
  Prediction p;
  p.scores.resize(class_count_);
  for (int o = 0; o < class_count_; ++o) {
    p.scores(o) = models_[static_cast<std::size_t>(o)].predict(z).scores(0);
  }
  p.label = classify(p.scores);
  return p;
}

std::vector<std::size_t> Classifier::rule_counts() const {
  std::vector<std::size_t> out;
  out.reserve(models_.size());
  for (const auto& m : models_) out.push_back(m.rule_count());
  return out;
}

Classifier Classifier::from_parts(Parts parts) {
  parts.hp.validate();
  const std::size_t expected = parts.hp.mode == ClassifierMode::mimo ? 1 : static_cast<std::size_t>(parts.class_count);
  if (parts.models.size() != expected) {
    throw std::invalid_argument("sub-model count does not match classifier mode");
  }
  for (const auto& m : parts.models) {
    const int dims = m.network().input_dim;
    const int outs = m.network().class_dim;
    const int want = parts.hp.mode == ClassifierMode::mimo ? parts.class_count : 1;
    if (dims != parts.input_dim || outs != want) {
      throw std::invalid_argument("sub-model dimensions do not match classifier");
    }
  }
  Classifier c;
  c.input_dim_ = parts.input_dim;
  c.class_count_ = parts.class_count;
  c.hp_ = parts.hp;
  c.models_ = std::move(parts.models);
  c.normalizer_ = std::move(parts.normalizer);
  c.pending_ = std::move(parts.pending);
  return c;
}

}  // namespace et2q
