#pragma once

// Small deterministic inputs shared by unit and acceptance tests.

#include "cpredict/ingest.hpp"
#include "cpredict/model.hpp"
#include "cpredict/random.hpp"
#include "cpredict/simulate.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

namespace fixtures {

struct Tiny {
  cpredict::model::FitData data;
  cpredict::model::ModelState state;
};

// Random state and data drawn around it. Subject 0 always has every
// indicator observed; later subjects have each indicator missing w.p. 0.3.
inline Tiny tiny_problem(std::uint64_t seed, int V = 2, int n = 2, int P = 1) {
  cpredict::Random rng(seed);
  Tiny t;
  auto& s = t.state;
  auto& d = t.data;
  const int dim = V + 1;
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int k = 0; k < dim; ++k) a(i, k) = rng.normal(0.0, 0.6);
  }
  s.Sigma = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
  s.latent_mean = Eigen::VectorXd(V);
  for (int v = 0; v < V; ++v) s.latent_mean(v) = rng.normal(0.5, 0.5);
  s.D = Eigen::MatrixXd::Zero(V, V);
  for (int u = 0; u < V; ++u) {
    for (int v = u + 1; v < V; ++v) s.D(u, v) = s.D(v, u) = rng.normal(0.0, 0.5);
  }
  s.e = Eigen::VectorXd(P);
  s.sigma2_b = Eigen::VectorXd(P);
  for (int p = 0; p < P; ++p) {
    s.e(p) = rng.normal(0.0, 0.5);
    s.sigma2_b(p) = 0.2 + 1.5 * rng.uniform();
  }
  s.sigma2_c = 0.2 + 1.5 * rng.uniform();
  s.Y = Eigen::MatrixXd(n, V);
  s.kappa = Eigen::VectorXd(n);
  for (int j = 0; j < n; ++j) {
    for (int v = 0; v < V; ++v) s.Y(j, v) = rng.normal(s.latent_mean(v), 1.0);
    s.kappa(j) = rng.normal(0.0, 1.0);
  }

  d.condition = "Rest1";
  d.category = "Construct";
  for (int j = 0; j < n; ++j) {
    d.subject_ids.push_back("s" + std::to_string(j));
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(V, V);
    for (int u = 0; u < V; ++u) {
      for (int v = u + 1; v < V; ++v) {
        c(u, v) = c(v, u) = s.D(u, v) + s.Y(j, u) * s.Y(j, v) + rng.normal(0.0, std::sqrt(s.sigma2_c));
      }
    }
    d.connectomes.push_back(c);
  }
  d.behavior = Eigen::MatrixXd(n, P);
  d.observed.resize(n, P);
  for (int p = 0; p < P; ++p) {
    d.indicators.push_back("ind" + std::to_string(p + 1));
    d.scaling.push_back({0.0, 1.0});
  }
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < P; ++p) {
      const bool obs = j == 0 || rng.uniform() > 0.3;
      d.observed(j, p) = obs;
      d.behavior(j, p) = obs ? s.e(p) + s.kappa(j) + rng.normal(0.0, std::sqrt(s.sigma2_b(p)))
                             : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return t;
}

// Criterion-1 style generator: V nodes, the first cross.size() carrying
// the given node-construct covariances.
inline cpredict::model::Simulation make_sim(int V, int n, int P, std::vector<double> cross, double sigma2_c,
                                            double sigma2_b, std::uint64_t seed,
                                            std::vector<std::string> conditions = {"Rest1"}) {
  const auto sigma = cpredict::model::make_latent_covariance(V, cross);
  auto params = cpredict::model::make_gen_params(V, n, P, sigma, sigma2_c, sigma2_b, 1.0, 0.1, seed);
  params.conditions = std::move(conditions);
  return cpredict::model::simulate(params, seed + 1);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cpredict_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
