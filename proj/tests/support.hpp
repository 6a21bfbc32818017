#pragma once

// Hand-rolled generators for property tests. Everything is driven by an
// explicit Rng so failures replay from the printed seed.

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

#include "et2q/density.hpp"
#include "et2q/network.hpp"
#include "et2q/random.hpp"

namespace et2q::testing {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline Eigen::VectorXd uniform_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

/// Rule with every parameter uniform in [lo, hi].
inline Rule random_rule(Rng& rng, int input_dim, int class_dim, int grades, double lo = -2.0, double hi = 2.0) {
  Rule r(input_dim, class_dim, grades);
  for (int i = 0; i < input_dim; ++i) {
    r.mean(i) = uniform(rng, lo, hi);
    for (int g = 0; g < grades; ++g) {
      r.jumps.upper(i, g) = uniform(rng, lo, hi);
      r.jumps.lower(i, g) = uniform(rng, lo, hi);
    }
  }
  for (int o = 0; o < class_dim; ++o) {
    for (int k = 0; k <= input_dim; ++k) {
      r.omega_upper(o, k) = uniform(rng, lo, hi);
      r.omega_lower(o, k) = uniform(rng, lo, hi);
    }
  }
  return r;
}

inline NetworkState random_state(Rng& rng, int input_dim, int class_dim, int rules, int grades) {
  NetworkState s(input_dim, class_dim, grades, uniform(rng, 0.5, 2.0));
  for (int k = 0; k < rules; ++k) s.rules.push_back(random_rule(rng, input_dim, class_dim, grades));
  for (int o = 0; o < class_dim; ++o) {
    s.q_lower(o) = uniform01(rng);
    s.q_upper(o) = uniform01(rng);
  }
  return s;
}

/// Input at least `margin` away from every rule mean and every branch
/// transition point |theta| on either side of it.
inline Eigen::VectorXd input_away_from_kinks(Rng& rng, const NetworkState& s, double margin) {
  Eigen::VectorXd x(s.input_dim);
  for (int i = 0; i < s.input_dim; ++i) {
    for (;;) {
      const double v = uniform(rng, -2.5, 2.5);
      bool ok = true;
      for (const auto& r : s.rules) {
        if (std::abs(v - r.mean(i)) < margin) ok = false;
      }
      if (ok) {
        x(i) = v;
        break;
      }
    }
  }
  return x;
}

inline GmmDensity random_gmm(Rng& rng, int dim, int components) {
  GmmDensity g;
  g.weights.resize(components);
  for (int h = 0; h < components; ++h) {
    g.weights(h) = uniform(rng, 0.2, 1.0);
    g.means.push_back(uniform_vector(rng, dim, -2.0, 2.0));
    g.variances.push_back(uniform_vector(rng, dim, 0.1, 2.0));
  }
  g.weights /= g.weights.sum();
  return g;
}

}  // namespace et2q::testing
