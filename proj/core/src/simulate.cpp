#include "cpredict/simulate.hpp"

#include "cpredict/random.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cpredict::model {

Eigen::MatrixXd make_latent_covariance(int V, const std::vector<double>& cross, double node_var, double kappa_var) {
  if (static_cast<int>(cross.size()) > V) throw std::invalid_argument("more cross-covariances than nodes");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(V + 1, V + 1);
  s.diagonal().head(V).setConstant(node_var);
  s(V, V) = kappa_var;
  for (std::size_t v = 0; v < cross.size(); ++v) {
    s(static_cast<Eigen::Index>(v), V) = cross[v];
    s(V, static_cast<Eigen::Index>(v)) = cross[v];
  }
  return s;
}

GenParams make_gen_params(int V, int n_subjects, int P, const Eigen::MatrixXd& sigma_true, double sigma2_c,
                          double sigma2_b, double mean_level, double d_sd, std::uint64_t seed) {
  GenParams g;
  g.V = V;
  g.n_subjects = n_subjects;
  g.P = P;
  g.sigma_true = sigma_true;
  g.d_true = Eigen::MatrixXd::Zero(V, V);
  Random rng(derive_seed(seed, {0xd0}));
  for (int u = 0; u < V; ++u) {
    for (int v = u + 1; v < V; ++v) {
      const double d = d_sd * rng.normal();
      g.d_true(u, v) = d;
      g.d_true(v, u) = d;
    }
  }
  g.e_true = Eigen::VectorXd::Zero(P);
  g.latent_mean = Eigen::VectorXd::Constant(V, mean_level);
  g.sigma2_c = sigma2_c;
  g.sigma2_b = Eigen::VectorXd::Constant(P, sigma2_b);
  return g;
}

ingest::Atlas make_block_atlas(int V) {
  ingest::Atlas atlas;
  for (int v = 0; v < V; ++v) {
    const auto net = static_cast<std::size_t>(v) * ingest::kNetworkCount / static_cast<std::size_t>(V);
    atlas.entries.push_back({v + 1, ingest::kAllNetworks[net], std::nullopt, std::nullopt});
  }
  return atlas;
}

Simulation simulate(const GenParams& g, std::uint64_t seed) {
  const int V = g.V;
  const int n = g.n_subjects;
  const int P = g.P;
  if (V < 2 || n < 2 || P < 1) throw std::invalid_argument("simulate: need V >= 2, n >= 2, P >= 1");
  if (g.sigma_true.rows() != V + 1 || g.sigma_true.cols() != V + 1) {
    throw std::invalid_argument("simulate: Sigma_true must be (V+1)x(V+1)");
  }
  if (g.d_true.rows() != V || g.d_true.cols() != V) throw std::invalid_argument("simulate: D_true must be VxV");
  if (g.e_true.size() != P || g.sigma2_b.size() != P) {
    throw std::invalid_argument("simulate: e_true and sigma2_b must have length P");
  }
  if (g.latent_mean.size() != V) throw std::invalid_argument("simulate: latent mean must have length V");
  if (g.sigma2_c < 0.0 || (g.sigma2_b.array() < 0.0).any()) {
    throw std::invalid_argument("simulate: noise variances must be >= 0");
  }
  if (g.conditions.empty()) throw std::invalid_argument("simulate: at least one condition");
  if ((g.sigma_true - g.sigma_true.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("simulate: Sigma_true is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(g.sigma_true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.sigma_true, Eigen::EigenvaluesOnly);
  if (llt.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument("simulate: Sigma_true is not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();

  Random latent_rng(derive_seed(seed, {1}));
  Random behavior_rng(derive_seed(seed, {2}));

  Simulation sim;
  auto& truth = sim.truth;
  truth.sigma = g.sigma_true;
  truth.latent_mean = g.latent_mean;
  truth.d = g.d_true;
  truth.d.diagonal().setZero();
  truth.e = g.e_true;
  truth.Y.resize(n, V);
  truth.kappa.resize(n);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(V + 1);
  mean.head(V) = g.latent_mean;
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd z = latent_rng.mvn_from_cholesky(mean, lower);
    truth.Y.row(j) = z.head(V).transpose();
    truth.kappa(j) = z(V);
  }

  auto& ds = sim.dataset;
  ds.V = V;
  ds.conditions = g.conditions;
  ds.atlas = make_block_atlas(V);
  std::vector<std::string> ids;
  for (int j = 0; j < n; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sub-%04d", j + 1);
    ids.emplace_back(buf);
  }

  const double sd_c = std::sqrt(g.sigma2_c);
  for (std::size_t ci = 0; ci < g.conditions.size(); ++ci) {
    Random noise_rng(derive_seed(seed, {3, ci}));
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd y = truth.Y.row(j).transpose();
      Eigen::MatrixXd c = truth.d + y * y.transpose();
      for (int u = 0; u < V; ++u) {
        c(u, u) = 0.0;
        for (int v = u + 1; v < V; ++v) {
          const double noisy = c(u, v) + sd_c * noise_rng.normal();
          c(u, v) = noisy;
          c(v, u) = noisy;
        }
      }
      ds.connectomes[{ids[j], g.conditions[ci]}] = {ids[j], g.conditions[ci], std::move(c)};
    }
  }

  ingest::BehaviorPanel panel;
  panel.category = g.category;
  panel.subject_ids = ids;
  for (int p = 0; p < P; ++p) panel.indicators.push_back("ind" + std::to_string(p + 1));
  panel.values.resize(n, P);
  panel.observed.setConstant(n, P, true);
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < P; ++p) {
      panel.values(j, p) = g.e_true(p) + truth.kappa(j) + std::sqrt(g.sigma2_b(p)) * behavior_rng.normal();
    }
  }
  ds.behaviors.emplace(g.category, std::move(panel));
  return sim;
}

void write_simulation(const Simulation& sim, const GenParams& params, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto& ds = sim.dataset;
  fs::create_directories(dir / "connectomes");
  ingest::write_atlas(ds.atlas, dir / "atlas.csv");

  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["V"] = ds.V;
  manifest["scale"] = "fisher_z";
  manifest["atlas"] = "atlas.csv";
  manifest["behaviors"] = nlohmann::json::array();
  for (const auto& [category, panel] : ds.behaviors) {
    const std::string file = "behavior_" + category + ".csv";
    ingest::write_behavior_panel(panel, dir / file);
    manifest["behaviors"].push_back({{"category", category}, {"path", file}});
  }
  manifest["connectomes"] = nlohmann::json::array();
  for (const auto& cond : ds.conditions) {
    for (const auto& subject : ds.subjects()) {
      const std::string file = "connectomes/" + subject + "_" + cond + ".csv";
      ingest::write_matrix_csv(ds.connectome(subject, cond).matrix, dir / file);
      manifest["connectomes"].push_back({{"subject", subject}, {"condition", cond}, {"path", file}});
    }
  }
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  }

  const auto& t = sim.truth;
  nlohmann::json gt;
  const auto V = ds.V;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  gt["V"] = V;
  gt["n_subjects"] = params.n_subjects;
  gt["P"] = params.P;
  gt["sigma2_c"] = params.sigma2_c;
  gt["sigma2_b"] = vec(params.sigma2_b);
  gt["cross_covariance"] = vec(t.cross_covariance());
  gt["latent_mean"] = vec(t.latent_mean);
  gt["kappa_variance"] = t.sigma(V, V);
  gt["node_variance"] = vec(t.sigma.diagonal().head(V));
  nlohmann::json subjects = nlohmann::json::array();
  const auto ids = ds.subjects();
  for (int j = 0; j < t.Y.rows(); ++j) {
    subjects.push_back({{"subject_id", ids[static_cast<std::size_t>(j)]},
                        {"kappa", t.kappa(j)},
                        {"y", vec(t.Y.row(j).transpose())}});
  }
  gt["subjects"] = subjects;
  std::ofstream out(dir / "ground_truth.json", std::ios::binary | std::ios::trunc);
  out << gt.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write ground_truth.json");
}

}  // namespace cpredict::model
