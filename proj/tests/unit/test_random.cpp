#include "cpredict/random.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace cpredict;

TEST_SUITE("random") {

TEST_CASE("derived seeds differ by path and are stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {a, b}));
  }
  CHECK(seen.size() == 400u);
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
}

TEST_CASE("gamma and inverse-gamma moments") {
  Random rng(1);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gamma(3.0, 2.0);
    s += g;
    s2 += g * g;
  }
  CHECK(s / n == doctest::Approx(6.0).epsilon(0.01));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(12.0).epsilon(0.03));
  double ig = 0;
  for (int i = 0; i < n; ++i) ig += rng.inverse_gamma(4.0, 3.0);
  CHECK(ig / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("inverse-Wishart mean is scale / (df - d - 1)") {
  Random rng(2);
  Eigen::MatrixXd scale(3, 3);
  scale << 2, 0.5, 0, 0.5, 1, 0.3, 0, 0.3, 1.5;
  const double df = 9;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  const int n = 40000;
  for (int i = 0; i < n; ++i) acc += rng.inverse_wishart(df, scale);
  const Eigen::MatrixXd want = scale / (df - 3 - 1);
  CHECK((acc / n - want).cwiseAbs().maxCoeff() < 0.01);
  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS(rng.inverse_wishart(df, bad));
}

TEST_CASE("multivariate normal from a Cholesky factor") {
  Random rng(3);
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.6, 0.6, 2.0;
  const Eigen::MatrixXd L = cov.llt().matrixL();
  Eigen::Vector2d mean(1.0, -1.0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = rng.mvn_from_cholesky(mean, L);
    m += x;
    acc += (x - mean) * (x - mean).transpose();
  }
  CHECK((m / n - mean).cwiseAbs().maxCoeff() < 0.02);
  CHECK((acc / n - cov).cwiseAbs().maxCoeff() < 0.03);
}

}
