#include "cpredict/random.hpp"

#include <cmath>
#include <stdexcept>

namespace cpredict {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

double Random::gamma(double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

Eigen::VectorXd Random::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Eigen::VectorXd Random::mvn_from_cholesky(const Eigen::VectorXd& mean, const Eigen::MatrixXd& lower) {
  return mean + lower.triangularView<Eigen::Lower>() * normal_vector(mean.size());
}

Eigen::MatrixXd Random::inverse_wishart(double df, const Eigen::MatrixXd& scale) {
  const auto d = scale.rows();
  if (df <= static_cast<double>(d) - 1.0) {
    throw std::invalid_argument("inverse-Wishart degrees of freedom must exceed dimension - 1");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("inverse-Wishart scale matrix is not positive definite");
  }
  // scale = U U^T. With W = U^{-T} A A^T U^{-1} ~ Wishart(df, scale^{-1}),
  // Sigma = W^{-1} = (U A^{-T})(U A^{-T})^T.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal();
  }
  const Eigen::MatrixXd u = llt.matrixL();
  // a^{-T} is upper triangular; solve a^T X = I.
  Eigen::MatrixXd a_inv_t = a.transpose().triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd t = u * a_inv_t;
  Eigen::MatrixXd sigma = t * t.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace cpredict
