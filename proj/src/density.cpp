#include "et2q/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "et2q/random.hpp"

namespace et2q {

void GmmDensity::validate() const {
  const std::size_t h = means.size();
  if (h == 0 || variances.size() != h || static_cast<std::size_t>(weights.size()) != h) {
    throw std::invalid_argument("gaussian mixture components are inconsistent");
  }
  const Eigen::Index d = means.front().size();
  double total = 0.0;
  for (std::size_t c = 0; c < h; ++c) {
    if (means[c].size() != d || variances[c].size() != d) {
      throw std::invalid_argument("gaussian mixture component dimension mismatch");
    }
    if (!(weights(static_cast<Eigen::Index>(c)) > 0.0)) {
      throw std::invalid_argument("gaussian mixture weight must be positive");
    }
    if (!((variances[c].array() > 0.0).all())) {
      throw std::invalid_argument("gaussian mixture variance must be positive");
    }
    total += weights(static_cast<Eigen::Index>(c));
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("gaussian mixture weights do not sum to one");
  }
}

GmmDensity GmmDensity::single(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance) {
  GmmDensity g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.means = {mean};
  g.variances = {variance.cwiseMax(kVarianceFloor)};
  return g;
}

SampleWindow::SampleWindow(std::size_t capacity, Eigen::Index dim)
    : capacity_(capacity), dim_(dim), mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {
  if (capacity == 0 || dim < 1) {
    throw std::invalid_argument("sample window needs positive capacity and dimension");
  }
}

void SampleWindow::push(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != dim_) {
    throw std::invalid_argument("sample dimension does not match window");
  }
  if (samples_.size() == capacity_) {
    samples_.pop_front();
  }
  samples_.emplace_back(x);
  ++seen_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(seen_);
  m2_ += delta.cwiseProduct(x - mean_);
}

Eigen::VectorXd SampleWindow::running_variance() const {
  if (seen_ == 0) {
    return Eigen::VectorXd::Constant(dim_, kVarianceFloor);
  }
  return (m2_ / static_cast<double>(seen_)).cwiseMax(kVarianceFloor);
}

void SampleWindow::restore(std::size_t capacity, Eigen::Index dim, std::uint64_t seen, Eigen::VectorXd mean,
                           Eigen::VectorXd m2, std::deque<Eigen::VectorXd> samples) {
  if (samples.size() > capacity || mean.size() != dim || m2.size() != dim) {
    throw std::invalid_argument("inconsistent sample window state");
  }
  capacity_ = capacity;
  dim_ = dim;
  seen_ = seen;
  mean_ = std::move(mean);
  m2_ = std::move(m2);
  samples_ = std::move(samples);
}

double gaussian_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& v,
                       const Eigen::Ref<const Eigen::VectorXd>& sigma_diag) {
  if (x.size() != v.size() || x.size() != sigma_diag.size()) {
    throw std::invalid_argument("gaussian kernel dimension mismatch");
  }
  if (!((sigma_diag.array() > 0.0).all())) {
    throw std::domain_error("gaussian kernel variance must be positive");
  }
  const double q = ((x - v).array().square() / sigma_diag.array()).sum();
  return std::exp(-q);
}

namespace {

GmmDensity moment_match(const std::vector<Eigen::VectorXd>& samples, Eigen::Index dim) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) mean += s;
  if (!samples.empty()) mean /= static_cast<double>(samples.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) var += (s - mean).array().square().matrix();
  if (!samples.empty()) var /= static_cast<double>(samples.size());
  return GmmDensity::single(mean, var);
}

// Log of the normalized diagonal Gaussian density.
double log_normal_diag(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
  const double quad = ((x - mean).array().square() / var.array()).sum();
  const double logdet = var.array().log().sum();
  return -0.5 * (quad + logdet + static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

std::vector<Eigen::VectorXd> kmeanspp_seeds(const std::vector<Eigen::VectorXd>& samples, std::size_t k, Rng& rng) {
  const std::size_t n = samples.size();
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(k);
  centers.push_back(samples[uniform_index(rng, n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (samples[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    if (!(total > 0.0)) {
      centers.push_back(centers.back());
      continue;
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > target) {
        pick = i;
        break;
      }
    }
    centers.push_back(samples[pick]);
  }
  return centers;
}

}  // namespace

GmmFit fit_gmm_traced(const std::vector<Eigen::VectorXd>& samples, std::size_t components, std::uint64_t seed,
                      const EmOptions& options) {
  if (samples.empty()) {
    throw std::invalid_argument("cannot fit a mixture to an empty window");
  }
  if (components == 0) {
    throw std::invalid_argument("mixture needs at least one component");
  }
  const Eigen::Index dim = samples.front().size();
  const std::size_t n = samples.size();
  GmmFit fit;
  if (n < std::max<std::size_t>(2 * components, 4)) {
    fit.density = moment_match(samples, dim);
    return fit;
  }

  const GmmDensity overall = moment_match(samples, dim);
  Rng rng(seed);
  GmmDensity g;
  g.means = kmeanspp_seeds(samples, components, rng);
  g.variances.assign(components, overall.variances.front());
  g.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(components), 1.0 / static_cast<double>(components));

  const auto h_count = static_cast<Eigen::Index>(components);
  Eigen::MatrixXd resp(static_cast<Eigen::Index>(n), h_count);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // E-step.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      double peak = -std::numeric_limits<double>::infinity();
      for (Eigen::Index h = 0; h < h_count; ++h) {
        const auto hc = static_cast<std::size_t>(h);
        resp(row, h) = std::log(g.weights(h)) + log_normal_diag(samples[i], g.means[hc], g.variances[hc]);
        peak = std::max(peak, resp(row, h));
      }
      double s = 0.0;
      for (Eigen::Index h = 0; h < h_count; ++h) {
        resp(row, h) = std::exp(resp(row, h) - peak);
        s += resp(row, h);
      }
      resp.row(row) /= s;
      ll += peak + std::log(s);
    }
    fit.log_likelihood.push_back(ll);

    // M-step.
    for (Eigen::Index h = 0; h < h_count; ++h) {
      const auto hc = static_cast<std::size_t>(h);
      const double nh = resp.col(h).sum();
      if (nh <= 1e-12) {
        continue;
      }
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
      for (std::size_t i = 0; i < n; ++i) mean += resp(static_cast<Eigen::Index>(i), h) * samples[i];
      mean /= nh;
      Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
      for (std::size_t i = 0; i < n; ++i) {
        var += resp(static_cast<Eigen::Index>(i), h) * (samples[i] - mean).array().square().matrix();
      }
      g.means[hc] = mean;
      g.variances[hc] = (var / nh).cwiseMax(kVarianceFloor);
    }
    Eigen::VectorXd w = resp.colwise().sum().transpose() / static_cast<double>(n);
    w = w.cwiseMax(1e-12);
    g.weights = w / w.sum();

    const auto t = fit.log_likelihood.size();
    if (t >= 2) {
      const double prev = fit.log_likelihood[t - 2];
      if (std::abs(ll - prev) <= options.relative_tolerance * std::abs(prev)) {
        break;
      }
    }
  }
  fit.density = std::move(g);
  return fit;
}

GmmDensity fit_gmm(const SampleWindow& window, std::size_t components, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> samples(window.samples().begin(), window.samples().end());
  return fit_gmm_traced(samples, components, seed).density;
}

Eigen::VectorXd mixed_mean(const GmmDensity& gmm) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(gmm.dim());
  for (std::size_t h = 0; h < gmm.component_count(); ++h) {
    v += gmm.weights(static_cast<Eigen::Index>(h)) * gmm.means[h];
  }
  return v;
}

Eigen::VectorXd mixed_variance(const GmmDensity& gmm) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(gmm.dim());
  for (std::size_t h = 0; h < gmm.component_count(); ++h) {
    v += gmm.weights(static_cast<Eigen::Index>(h)) * gmm.variances[h];
  }
  return v;
}

DensityTracker::DensityTracker(std::size_t capacity, Eigen::Index dim, std::size_t components, std::uint64_t seed)
    : window_(capacity, dim), components_(components), seed_(seed) {
  if (components == 0) {
    throw std::invalid_argument("mixture needs at least one component");
  }
}

void DensityTracker::observe(const Eigen::Ref<const Eigen::VectorXd>& x) {
  window_.push(x);
  const std::uint64_t seen = window_.total_seen();
  if (seen < window_.capacity()) {
    current_ = GmmDensity::single(window_.running_mean(), window_.running_variance());
  } else if (seen % window_.capacity() == 0) {
    current_ = fit_gmm(window_, components_, seed_ + refits_);
    ++refits_;
  }
}

void DensityTracker::restore(SampleWindow window, GmmDensity current, std::size_t components, std::uint64_t seed,
                             std::uint64_t refits) {
  window_ = std::move(window);
  current_ = std::move(current);
  components_ = components;
  seed_ = seed;
  refits_ = refits;
}

}  // namespace et2q
