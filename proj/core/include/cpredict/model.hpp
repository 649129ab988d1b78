#pragma once

// Joint latent-space model of connectomes and one behavior category.
//
// For subject j with off-diagonal connectome entries C_j[u,v] and standardized
// indicators b_j[p]:
//
//   C_j[u,v] = D[u,v] + y_j[u] * y_j[v] + noise,   noise ~ N(0, sigma2_c)
//   b_j[p]   = e[p] + kappa_j + noise,             noise ~ N(0, sigma2_b[p])
//   (y_j, kappa_j) ~ N((mu, 0), Sigma)
//
// Sigma is (V+1)x(V+1); its last column above the diagonal holds the per-node
// brain-behavior covariances used for biomarker ranking.

#include "cpredict/ingest.hpp"
#include "cpredict/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpredict::model {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Priors {
  double intercept_var = 10.0;    // D[u,v] ~ N(0, .), e[p] ~ N(0, .)
  double latent_mean_var = 10.0;  // mu[v] ~ N(0, .)
  double iw_df_offset = 3.0;      // Sigma ~ IW(V + offset, iw_scale * I)
  double iw_scale = 1.0;
  double ig_shape = 2.0;  // sigma2 ~ IG(shape, scale)
  double ig_scale = 1.0;
  double variance_floor = 1e-8;
  double jitter = 1e-8;
};

struct SamplerConfig {
  int burn_in = 5000;
  int samples = 15000;
  int thin = 1;
  int chains = 1;
  int inits = 10;
  std::uint64_t seed = 0;
  Priors priors;

  /// Throws std::invalid_argument when a count is out of range.
  void validate() const;
  /// Retained draws per chain; each is separated by `thin` sweeps.
  int retained_per_chain() const { return samples; }
  long sweeps_per_chain() const { return static_cast<long>(burn_in) + static_cast<long>(samples) * thin; }
};

/// Everything a single fit reads: connectomes for one condition and the
/// standardized panel of one category, aligned by subject.
struct FitData {
  std::string condition;
  std::string category;
  std::vector<std::string> subject_ids;
  std::vector<Eigen::MatrixXd> connectomes;
  Eigen::MatrixXd behavior;  // standardized; NaN where missing
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
  std::vector<std::string> indicators;
  std::vector<ingest::IndicatorScaling> scaling;

  int V() const { return connectomes.empty() ? 0 : static_cast<int>(connectomes.front().rows()); }
  int n() const { return static_cast<int>(subject_ids.size()); }
  int P() const { return static_cast<int>(indicators.size()); }
  int edge_count() const { return V() * (V() - 1) / 2; }
};

/// Builds the fit input for the subjects of `panel` (raw, unstandardized).
/// Standardization uses observed entries only, so masked rows never
/// influence the scaling.
FitData make_fit_data(const ingest::Dataset& dataset, const std::string& condition,
                      const ingest::BehaviorPanel& panel);
FitData make_fit_data(const ingest::Dataset& dataset, const std::string& condition,
                      const std::string& category);

struct ModelState {
  Eigen::MatrixXd D;            // V x V, symmetric, zero diagonal
  Eigen::VectorXd e;            // P
  Eigen::VectorXd latent_mean;  // V; construct mean is fixed at 0
  Eigen::MatrixXd Sigma;        // (V+1) x (V+1)
  double sigma2_c = 1.0;
  Eigen::VectorXd sigma2_b;     // P
  Eigen::MatrixXd Y;            // n x V node latents
  Eigen::VectorXd kappa;        // n construct scores
  bool used_fallback = false;

  int V() const { return static_cast<int>(D.rows()); }
  /// Sigma[v, V] for every node v.
  Eigen::VectorXd cross_covariance() const { return Sigma.col(V()).head(V()); }
};

/// Throws SamplerError if a state invariant does not hold for `data`.
void check_state(const ModelState& state, const FitData& data);

/// Rank-1 factor of a symmetric matrix: leading eigenvector scaled by the
/// square root of the (non-negative part of the) leading eigenvalue.
Eigen::VectorXd rank_one_factor(const Eigen::MatrixXd& m);

/// Deterministic starting point. `perturbation` > 0 adds seeded N(0, 0.1^2)
/// noise to every latent (used for restarts and extra chains).
ModelState init_state(const FitData& data, std::uint64_t seed, int perturbation = 0,
                      const Priors& priors = {});
ModelState init_state(const ingest::Dataset& dataset, const std::string& condition,
                      const std::string& category, std::uint64_t seed);

// Blocks of one sweep, in update order.
enum Block : unsigned {
  kLatents = 1u << 0,
  kLatentSigns = 1u << 1,
  kConstruct = 1u << 2,
  kConnectomeIntercept = 1u << 3,
  kBehaviorIntercept = 1u << 4,
  kLatentMean = 1u << 5,
  kCovariance = 1u << 6,
  kNoiseVariances = 1u << 7,
  kAllBlocks = (1u << 8) - 1,
};

struct SweepOptions {
  unsigned blocks = kAllBlocks;
  Priors priors;
};

/// One full Gibbs sweep in place. `iteration` only labels error messages.
void gibbs_sweep(ModelState& state, const FitData& data, Random& rng, const SweepOptions& options = {},
                 long iteration = 0);

/// Functional form of gibbs_sweep.
ModelState gibbs_step(const ModelState& state, const FitData& data, Random& rng,
                      const SweepOptions& options = {});

// Full conditionals. Each is exact given the rest of the state; the sampler
// draws from these and the oracle tests compare them against grid densities.

struct GaussianConditional {
  double mean = 0.0;
  double variance = 0.0;
};

struct InverseGammaConditional {
  double shape = 0.0;
  double scale = 0.0;
};

struct InverseWishartConditional {
  double df = 0.0;
  Eigen::MatrixXd scale;
};

struct MultivariateNormalConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};

/// `precision` is Sigma^{-1}.
GaussianConditional latent_conditional(const ModelState& s, const FitData& data, const Eigen::MatrixXd& precision,
                                       int subject, int node);
GaussianConditional construct_conditional(const ModelState& s, const FitData& data,
                                          const Eigen::MatrixXd& precision, int subject);
GaussianConditional connectome_intercept_conditional(const ModelState& s, const FitData& data, const Priors& priors,
                                                     int u, int v);
GaussianConditional behavior_intercept_conditional(const ModelState& s, const FitData& data, const Priors& priors,
                                                   int indicator);
MultivariateNormalConditional latent_mean_conditional(const ModelState& s, const FitData& data,
                                                      const Eigen::MatrixXd& precision, const Priors& priors);
InverseWishartConditional covariance_conditional(const ModelState& s, const FitData& data, const Priors& priors);
InverseGammaConditional connectome_noise_conditional(const ModelState& s, const FitData& data, const Priors& priors);
InverseGammaConditional behavior_noise_conditional(const ModelState& s, const FitData& data, const Priors& priors,
                                                   int indicator);
/// Probability of replacing y_j by -y_j. The connectome likelihood is
/// invariant under the reflection, so only the latent prior decides.
double sign_flip_probability(const ModelState& s, const Eigen::MatrixXd& precision, int subject);

/// Log joint density (likelihood over upper-triangle edges and observed
/// indicators, latent prior, hyperpriors) with all normalizing constants.
double log_joint(const ModelState& state, const FitData& data, const Priors& priors = {});
double log_joint(const ModelState& state, const ingest::Dataset& dataset, const std::string& condition,
                 const std::string& category);

struct Draw {
  long iteration = 0;
  double log_joint = 0.0;
  Eigen::VectorXd cross;  // V
  Eigen::VectorXd kappa;  // tracked subjects
  Eigen::VectorXd e;      // P
};

struct PosteriorDraws {
  int chain_id = 0;
  int restart = 0;
  std::vector<int> tracked_subjects;
  std::vector<Draw> draws;
  bool used_fallback = false;
  ModelState final_state;

  double mean_log_joint() const;
};

struct ChainOptions {
  int restart = 0;
  std::uint64_t stream = 0;  // distinguishes e.g. CV repeats sharing one seed
  std::vector<int> tracked_subjects;
};

/// init_state followed by burn_in + samples * thin sweeps, keeping every
/// thin-th post-burn-in state. Deterministic in (seed, stream, restart, chain).
PosteriorDraws run_chain(const FitData& data, const SamplerConfig& config, int chain_id,
                         const ChainOptions& options = {});
PosteriorDraws run_chain(const ingest::Dataset& dataset, const std::string& condition,
                         const std::string& category, const SamplerConfig& config, int chain_id);

struct NodeSummary {
  int node_id = 0;
  double cov_mean = 0.0;
  double cov_sd = 0.0;
  double ci05 = 0.0;
  double ci95 = 0.0;
};

struct PosteriorSummary {
  std::vector<NodeSummary> nodes;

  Eigen::VectorXd means() const;
};

/// Pools all chains. Throws std::invalid_argument when there are no draws.
PosteriorSummary posterior_summary(std::span<const PosteriorDraws> chains);

/// Node-wise mean of several summaries (e.g. one per CV repeat).
PosteriorSummary average_summaries(std::span<const PosteriorSummary> summaries);

void write_summary_csv(const PosteriorSummary& summary, const std::filesystem::path& path);
PosteriorSummary read_summary_csv(const std::filesystem::path& path);

/// Long-format trace: chain,iter,log_joint,node_id,cov_draw.
void write_trace_csv(std::span<const PosteriorDraws> chains, const std::filesystem::path& path);

struct TraceTable {
  // chain id -> node index -> draws in iteration order
  std::vector<int> chain_ids;
  std::vector<std::vector<std::vector<double>>> cov;
  std::vector<std::vector<double>> log_joint;
};
TraceTable read_trace_csv(const std::filesystem::path& path);

}  // namespace cpredict::model
