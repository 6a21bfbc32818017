#pragma once

// Diagonal Gaussian mixture approximation of the input density, maintained
// over a bounded window of recent samples.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include <Eigen/Core>

namespace et2q {

inline constexpr double kVarianceFloor = 1e-6;

struct GmmDensity {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::VectorXd> variances;  // diagonals

  std::size_t component_count() const { return means.size(); }
  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }

  /// Throws std::invalid_argument when shapes, weights or variances are off.
  void validate() const;

  static GmmDensity single(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance);
};

/// Ring buffer of the most recent inputs plus running moments over every
/// sample pushed (Welford).
class SampleWindow {
 public:
  SampleWindow() = default;
  SampleWindow(std::size_t capacity, Eigen::Index dim);

  void push(const Eigen::Ref<const Eigen::VectorXd>& x);

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  Eigen::Index dim() const { return dim_; }
  std::uint64_t total_seen() const { return seen_; }
  const std::deque<Eigen::VectorXd>& samples() const { return samples_; }

  const Eigen::VectorXd& running_mean() const { return mean_; }
  /// Population variance of everything seen so far, floored.
  Eigen::VectorXd running_variance() const;

  // Raw accumulator access for serialization.
  const Eigen::VectorXd& running_m2() const { return m2_; }
  void restore(std::size_t capacity, Eigen::Index dim, std::uint64_t seen, Eigen::VectorXd mean, Eigen::VectorXd m2,
               std::deque<Eigen::VectorXd> samples);

 private:
  std::size_t capacity_ = 0;
  Eigen::Index dim_ = 0;
  std::uint64_t seen_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
  std::deque<Eigen::VectorXd> samples_;
};

/// exp(-(x-v)^T diag(sigma)^-1 (x-v)); unnormalized and without the 1/2.
double gaussian_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& v,
                       const Eigen::Ref<const Eigen::VectorXd>& sigma_diag);

struct EmOptions {
  int max_iterations = 50;
  double relative_tolerance = 1e-6;
};

struct GmmFit {
  GmmDensity density;
  std::vector<double> log_likelihood;  // one entry per completed EM iteration
};

/// EM with k-means++ seeding. Windows with fewer than max(2H, 4) samples fall
/// back to a single moment-matched component.
GmmFit fit_gmm_traced(const std::vector<Eigen::VectorXd>& samples, std::size_t components, std::uint64_t seed,
                      const EmOptions& options = {});
GmmDensity fit_gmm(const SampleWindow& window, std::size_t components, std::uint64_t seed);

Eigen::VectorXd mixed_mean(const GmmDensity& gmm);
Eigen::VectorXd mixed_variance(const GmmDensity& gmm);

/// Window plus refit cadence. Below `capacity` samples the density is a
/// single component from running moments; afterwards it is refit every
/// `capacity` samples over the current window.
class DensityTracker {
 public:
  DensityTracker() = default;
  DensityTracker(std::size_t capacity, Eigen::Index dim, std::size_t components, std::uint64_t seed);

  void observe(const Eigen::Ref<const Eigen::VectorXd>& x);
  const GmmDensity& current() const { return current_; }
  const SampleWindow& window() const { return window_; }
  std::size_t components() const { return components_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t refits() const { return refits_; }

  void restore(SampleWindow window, GmmDensity current, std::size_t components, std::uint64_t seed,
               std::uint64_t refits);

 private:
  SampleWindow window_;
  GmmDensity current_;
  std::size_t components_ = 3;
  std::uint64_t seed_ = 0;
  std::uint64_t refits_ = 0;
};

}  // namespace et2q
