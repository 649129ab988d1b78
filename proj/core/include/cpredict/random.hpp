#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cpredict {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a sub-stream identified by a path of integers, e.g.
/// (seed, repeat, restart, chain). Distinct paths give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Gamma with shape k and scale theta (mean k*theta).
  double gamma(double shape, double scale);
  /// Inverse-gamma with shape a and scale b (density prop. to x^{-a-1} exp(-b/x)).
  double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }
  double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

  Eigen::VectorXd normal_vector(Eigen::Index n);

  /// Draw from N(mean, cov) given the lower Cholesky factor of cov.
  Eigen::VectorXd mvn_from_cholesky(const Eigen::VectorXd& mean, const Eigen::MatrixXd& lower);

  /// Inverse-Wishart(df, scale) via the Bartlett decomposition.
  /// Throws std::runtime_error if scale is not positive definite.
  Eigen::MatrixXd inverse_wishart(double df, const Eigen::MatrixXd& scale);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace cpredict
