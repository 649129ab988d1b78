#pragma once

#include "cpredict/ingest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cpredict::model {

/// Parameters of the generative process used for synthetic validation.
struct GenParams {
  int V = 0;
  int n_subjects = 0;
  int P = 0;
  Eigen::MatrixXd sigma_true;   // (V+1)x(V+1), positive definite
  Eigen::MatrixXd d_true;       // V x V intercept (diagonal ignored)
  Eigen::VectorXd e_true;       // P raw indicator intercepts
  Eigen::VectorXd latent_mean;  // V; zero gives a sign-symmetric connectome
  double sigma2_c = 0.25;
  Eigen::VectorXd sigma2_b;     // P
  std::vector<std::string> conditions{"Rest1"};
  std::string category = "Construct";
};

struct GroundTruth {
  Eigen::MatrixXd Y;      // n x V
  Eigen::VectorXd kappa;  // n
  Eigen::MatrixXd sigma;
  Eigen::VectorXd latent_mean;
  Eigen::MatrixXd d;
  Eigen::VectorXd e;

  Eigen::VectorXd cross_covariance() const {
    const auto V = d.rows();
    return sigma.col(V).head(V);
  }
};

struct Simulation {
  ingest::Dataset dataset;
  GroundTruth truth;
};

/// Latent covariance with node block `node_var * I`, construct variance
/// `kappa_var` and the given node-construct covariances (padded with zeros).
Eigen::MatrixXd make_latent_covariance(int V, const std::vector<double>& cross, double node_var = 1.0,
                                       double kappa_var = 1.0);

/// Convenience parameters: zero-free symmetric intercept drawn from
/// N(0, d_sd^2), raw indicator intercepts 0, latent mean `mean_level`.
GenParams make_gen_params(int V, int n_subjects, int P, const Eigen::MatrixXd& sigma_true, double sigma2_c,
                          double sigma2_b, double mean_level, double d_sd, std::uint64_t seed);

/// Atlas assigning nodes to the 10 networks in contiguous, near-equal blocks.
ingest::Atlas make_block_atlas(int V);

/// Draws latents, connectomes (one independent noise draw per condition on
/// shared latents) and raw behaviors. Throws std::invalid_argument for a
/// non-positive-definite sigma_true or inconsistent shapes.
Simulation simulate(const GenParams& params, std::uint64_t seed);

/// Writes manifest.json, atlas.csv, behavior CSV, connectome CSVs and
/// ground_truth.json under `dir`.
void write_simulation(const Simulation& sim, const GenParams& params, const std::filesystem::path& dir);

}  // namespace cpredict::model
