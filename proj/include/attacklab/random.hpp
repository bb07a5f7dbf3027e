#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace attacklab {

using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline double uniform_real(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                              double mean = 0.0, double stddev = 1.0) {
  std::normal_distribution<double> dist(mean, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

/// Glorot/Xavier uniform init: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

/// Sample k distinct elements from `candidates` (partial Fisher-Yates).
/// Order of the result is the draw order, not sorted.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> candidates, int k, Rng& rng) {
  const int n = static_cast<int>(candidates.size());
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_index(rng, n - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

/// Draw an index with probability proportional to `weights` (all >= 0, sum > 0).
inline int weighted_index(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double x = uniform_real(rng, 0.0, total);
  for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
    x -= weights[i];
    if (x < 0.0) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace attacklab
