#include "cpredict/model.hpp"

#include "cpredict/csv.hpp"
#include "cpredict/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

namespace cpredict::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kInitRidge = 1e-3;
constexpr double kInitPerturbationSd = 0.1;
constexpr int kInitRefineIterations = 30;

double checked(double value, const char* name, long iteration) {
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "non-finite " << name << " at iteration " << iteration;
    throw SamplerError(os.str());
  }
  return value;
}

Eigen::MatrixXd precision_of(const Eigen::MatrixXd& sigma, double jitter) {
  const auto d = sigma.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma + jitter * Eigen::MatrixXd::Identity(d, d));
  if (llt.info() != Eigen::Success) throw SamplerError("latent covariance is not positive definite");
  Eigen::MatrixXd q = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return 0.5 * (q + q.transpose());
}

// (y_j - mu, kappa_j)
Eigen::VectorXd centered_latent(const ModelState& s, int j) {
  const int V = s.V();
  Eigen::VectorXd z(V + 1);
  z.head(V) = s.Y.row(j).transpose() - s.latent_mean;
  z(V) = s.kappa(j);
  return z;
}

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

double log_inverse_gamma(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_multivariate_gamma(double a, int d) {
  double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= d; ++i) out += std::lgamma(a + 0.5 * (1 - i));
  return out;
}

// Mean of the standardized observed indicators per subject (0 if none).
Eigen::VectorXd observed_row_means(const FitData& data) {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(data.n());
  for (int j = 0; j < data.n(); ++j) {
    int count = 0;
    for (int p = 0; p < data.P(); ++p) {
      if (data.observed(j, p)) {
        k(j) += data.behavior(j, p);
        ++count;
      }
    }
    if (count > 0) k(j) /= count;
  }
  return k;
}

// Coordinate-wise least squares for y given residual r (off-diagonal only).
void refine_rank_one(const Eigen::MatrixXd& r, Eigen::Ref<Eigen::VectorXd> y) {
  double sumsq = y.squaredNorm();
  for (Eigen::Index v = 0; v < y.size(); ++v) {
    const double others = sumsq - y(v) * y(v);
    if (others <= 0.0) continue;
    const double dot = r.col(v).dot(y) - r(v, v) * y(v);
    const double next = dot / others;
    sumsq += next * next - y(v) * y(v);
    y(v) = next;
  }
}

}  // namespace

void SamplerConfig::validate() const {
  if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (chains < 1) throw std::invalid_argument("chains must be >= 1");
  if (inits < 1) throw std::invalid_argument("inits must be >= 1");
}

FitData make_fit_data(const ingest::Dataset& dataset, const std::string& condition,
                      const ingest::BehaviorPanel& panel) {
  FitData data;
  data.condition = condition;
  data.category = panel.category;
  data.subject_ids = panel.subject_ids;
  data.indicators = panel.indicators;
  data.connectomes.reserve(panel.subject_ids.size());
  for (const auto& s : panel.subject_ids) {
    data.connectomes.push_back(dataset.connectome(s, condition).matrix);
  }
  const auto standardized = ingest::standardize_behaviors(panel);
  data.behavior = standardized.values;
  data.observed = standardized.observed;
  data.scaling = standardized.scaling;
  return data;
}

FitData make_fit_data(const ingest::Dataset& dataset, const std::string& condition,
                      const std::string& category) {
  return make_fit_data(dataset, condition, dataset.behavior(category));
}

void check_state(const ModelState& s, const FitData& data) {
  const int V = data.V();
  const int n = data.n();
  const int P = data.P();
  if (s.D.rows() != V || s.D.cols() != V) throw SamplerError("D has wrong shape");
  if (s.e.size() != P || s.sigma2_b.size() != P) throw SamplerError("behavior parameters have wrong length");
  if (s.latent_mean.size() != V) throw SamplerError("latent mean has wrong length");
  if (s.Sigma.rows() != V + 1 || s.Sigma.cols() != V + 1) throw SamplerError("Sigma has wrong shape");
  if (s.Y.rows() != n || s.Y.cols() != V || s.kappa.size() != n) throw SamplerError("latents missing for some subjects");
  if (!(s.sigma2_c > 0.0)) throw SamplerError("sigma2_c must be positive");
  if ((s.sigma2_b.array() <= 0.0).any()) throw SamplerError("sigma2_b must be positive");
  if ((s.Sigma - s.Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8) throw SamplerError("Sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.Sigma, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw SamplerError("Sigma is not positive definite");
}

Eigen::VectorXd rank_one_factor(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw SamplerError("eigendecomposition failed");
  const auto last = m.rows() - 1;
  const double lambda = std::max(eig.eigenvalues()(last), 0.0);
  return std::sqrt(lambda) * eig.eigenvectors().col(last);
}

ModelState init_state(const FitData& data, std::uint64_t seed, int perturbation, const Priors& priors) {
  const int V = data.V();
  const int n = data.n();
  const int P = data.P();
  if (n < 2 || V < 2) throw SamplerError("need at least 2 subjects and 2 nodes");
  Random rng(seed);

  ModelState s;
  s.D = Eigen::MatrixXd::Zero(V, V);
  for (const auto& c : data.connectomes) s.D += c;
  s.D /= n;
  s.D.diagonal().setZero();

  s.Y.resize(n, V);
  double max_residual = 0.0, max_entry = 0.0;
  for (int j = 0; j < n; ++j) {
    max_residual = std::max(max_residual, (data.connectomes[j] - s.D).cwiseAbs().maxCoeff());
    max_entry = std::max(max_entry, data.connectomes[j].cwiseAbs().maxCoeff());
  }
  if (max_residual <= 1e-12 * (1.0 + max_entry)) {
    s.used_fallback = true;
    for (int j = 0; j < n; ++j) s.Y.row(j) = kInitPerturbationSd * rng.normal_vector(V).transpose();
  } else {
    for (int j = 0; j < n; ++j) s.Y.row(j) = rank_one_factor(data.connectomes[j] - s.D).transpose();

    // Per-subject eigenvector signs are arbitrary; align them with a common
    // reference direction whose entries sum to >= 0.
    Eigen::VectorXd ref = rank_one_factor(s.Y.transpose() * s.Y);
    if (ref.sum() < 0.0) ref = -ref;
    for (int j = 0; j < n; ++j) {
      if (s.Y.row(j).dot(ref.transpose()) < 0.0) s.Y.row(j) *= -1.0;
    }

    // Alternate between the intercept and the rank-1 factors; the mean
    // connectome otherwise absorbs the shared part of y_j y_j^T.
    Eigen::VectorXd y(V);
    for (int it = 0; it < kInitRefineIterations; ++it) {
      s.D.setZero();
      for (int j = 0; j < n; ++j) {
        y = s.Y.row(j).transpose();
        s.D += data.connectomes[j] - y * y.transpose();
      }
      s.D /= n;
      s.D.diagonal().setZero();
      for (int j = 0; j < n; ++j) {
        y = s.Y.row(j).transpose();
        refine_rank_one(data.connectomes[j] - s.D, y);
        s.Y.row(j) = y.transpose();
      }
    }
  }

  s.latent_mean = s.Y.colwise().mean().transpose();
  if (s.latent_mean.sum() < 0.0) {
    s.Y *= -1.0;
    s.latent_mean *= -1.0;
  }

  s.kappa = observed_row_means(data);

  if (perturbation > 0) {
    for (int j = 0; j < n; ++j) {
      for (int v = 0; v < V; ++v) s.Y(j, v) += kInitPerturbationSd * rng.normal();
      s.kappa(j) += kInitPerturbationSd * rng.normal();
    }
    s.latent_mean = s.Y.colwise().mean().transpose();
  }

  s.e = Eigen::VectorXd::Zero(P);
  s.sigma2_b = Eigen::VectorXd::Ones(P);
  for (int p = 0; p < P; ++p) {
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < n; ++j) {
      if (data.observed(j, p)) {
        sum += data.behavior(j, p) - s.kappa(j);
        ++count;
      }
    }
    if (count > 0) s.e(p) = sum / count;
    if (count > 1) {
      double ss = 0.0;
      for (int j = 0; j < n; ++j) {
        if (data.observed(j, p)) {
          const double r = data.behavior(j, p) - s.e(p) - s.kappa(j);
          ss += r * r;
        }
      }
      s.sigma2_b(p) = std::max(ss / (count - 1), priors.variance_floor);
    }
  }

  Eigen::MatrixXd z(n, V + 1);
  z.leftCols(V) = s.Y;
  z.col(V) = s.kappa;
  const Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
  s.Sigma = centered.transpose() * centered / (n - 1) +
            kInitRidge * Eigen::MatrixXd::Identity(V + 1, V + 1);

  double rss = 0.0;
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd yj = s.Y.row(j).transpose();
    const Eigen::MatrixXd r = data.connectomes[j] - s.D - yj * yj.transpose();
    for (int u = 0; u < V; ++u) {
      for (int v = u + 1; v < V; ++v) rss += r(u, v) * r(u, v);
    }
  }
  s.sigma2_c = std::max(rss / (static_cast<double>(n) * data.edge_count()), priors.variance_floor);
  return s;
}

ModelState init_state(const ingest::Dataset& dataset, const std::string& condition,
                      const std::string& category, std::uint64_t seed) {
  return init_state(make_fit_data(dataset, condition, category), seed);
}

GaussianConditional latent_conditional(const ModelState& s, const FitData& data, const Eigen::MatrixXd& precision,
                                       int subject, int node) {
  const auto& c = data.connectomes[static_cast<std::size_t>(subject)];
  const Eigen::VectorXd y = s.Y.row(subject).transpose();
  const Eigen::VectorXd z = centered_latent(s, subject);
  const double qvv = precision(node, node);
  const double others = y.squaredNorm() - y(node) * y(node);
  // Diagonals of C and D are zero, so the u == v term vanishes.
  const double dot = (c.col(node) - s.D.col(node)).dot(y);
  const double prior_linear = qvv * s.latent_mean(node) - (precision.col(node).dot(z) - qvv * z(node));
  const double prec = qvv + others / s.sigma2_c;
  return {(prior_linear + dot / s.sigma2_c) / prec, 1.0 / prec};
}

GaussianConditional construct_conditional(const ModelState& s, const FitData& data,
                                          const Eigen::MatrixXd& precision, int subject) {
  const int k = s.V();
  const Eigen::VectorXd z = centered_latent(s, subject);
  const double qkk = precision(k, k);
  double prec = qkk;
  double linear = -(precision.col(k).dot(z) - qkk * z(k));
  for (int p = 0; p < data.P(); ++p) {
    if (!data.observed(subject, p)) continue;
    prec += 1.0 / s.sigma2_b(p);
    linear += (data.behavior(subject, p) - s.e(p)) / s.sigma2_b(p);
  }
  return {linear / prec, 1.0 / prec};
}

GaussianConditional connectome_intercept_conditional(const ModelState& s, const FitData& data, const Priors& priors,
                                                     int u, int v) {
  double sum = 0.0;
  for (int j = 0; j < data.n(); ++j) {
    sum += data.connectomes[static_cast<std::size_t>(j)](u, v) - s.Y(j, u) * s.Y(j, v);
  }
  const double prec = 1.0 / priors.intercept_var + data.n() / s.sigma2_c;
  return {sum / s.sigma2_c / prec, 1.0 / prec};
}

GaussianConditional behavior_intercept_conditional(const ModelState& s, const FitData& data, const Priors& priors,
                                                   int indicator) {
  double sum = 0.0;
  int count = 0;
  for (int j = 0; j < data.n(); ++j) {
    if (!data.observed(j, indicator)) continue;
    sum += data.behavior(j, indicator) - s.kappa(j);
    ++count;
  }
  const double prec = 1.0 / priors.intercept_var + count / s.sigma2_b(indicator);
  return {sum / s.sigma2_b(indicator) / prec, 1.0 / prec};
}

MultivariateNormalConditional latent_mean_conditional(const ModelState& s, const FitData& data,
                                                      const Eigen::MatrixXd& precision, const Priors& priors) {
  const int V = s.V();
  const int n = data.n();
  const Eigen::MatrixXd qyy = precision.topLeftCorner(V, V);
  const Eigen::VectorXd qyk = precision.col(V).head(V);
  const Eigen::VectorXd linear = qyy * s.Y.colwise().sum().transpose() + qyk * s.kappa.sum();
  Eigen::MatrixXd prec = n * qyy;
  prec.diagonal().array() += 1.0 / priors.latent_mean_var;
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw SamplerError("latent mean precision is not positive definite");
  return {llt.solve(linear), prec};
}

InverseWishartConditional covariance_conditional(const ModelState& s, const FitData& data, const Priors& priors) {
  const int V = s.V();
  Eigen::MatrixXd scale = priors.iw_scale * Eigen::MatrixXd::Identity(V + 1, V + 1);
  for (int j = 0; j < data.n(); ++j) {
    const Eigen::VectorXd z = centered_latent(s, j);
    scale.selfadjointView<Eigen::Lower>().rankUpdate(z);
  }
  scale = scale.selfadjointView<Eigen::Lower>();
  return {V + priors.iw_df_offset + data.n(), scale};
}

InverseGammaConditional connectome_noise_conditional(const ModelState& s, const FitData& data, const Priors& priors) {
  const int V = s.V();
  double rss = 0.0;
  for (int j = 0; j < data.n(); ++j) {
    const auto& c = data.connectomes[static_cast<std::size_t>(j)];
    for (int v = 1; v < V; ++v) {
      const double yv = s.Y(j, v);
      for (int u = 0; u < v; ++u) {
        const double r = c(u, v) - s.D(u, v) - s.Y(j, u) * yv;
        rss += r * r;
      }
    }
  }
  const double count = static_cast<double>(data.n()) * data.edge_count();
  return {priors.ig_shape + 0.5 * count, priors.ig_scale + 0.5 * rss};
}

InverseGammaConditional behavior_noise_conditional(const ModelState& s, const FitData& data, const Priors& priors,
                                                   int indicator) {
  double rss = 0.0;
  int count = 0;
  for (int j = 0; j < data.n(); ++j) {
    if (!data.observed(j, indicator)) continue;
    const double r = data.behavior(j, indicator) - s.e(indicator) - s.kappa(j);
    rss += r * r;
    ++count;
  }
  return {priors.ig_shape + 0.5 * count, priors.ig_scale + 0.5 * rss};
}

double sign_flip_probability(const ModelState& s, const Eigen::MatrixXd& precision, int subject) {
  // With a = (y, 0) and b = (-mu, kappa), the quadratic forms of a + b and
  // -a + b differ by 4 a'Qb.
  const int V = s.V();
  const Eigen::VectorXd y = s.Y.row(subject).transpose();
  const double cross = y.dot(-precision.topLeftCorner(V, V) * s.latent_mean + precision.col(V).head(V) * s.kappa(subject));
  const double log_odds = 2.0 * cross;
  return 1.0 / (1.0 + std::exp(-log_odds));
}

void gibbs_sweep(ModelState& s, const FitData& data, Random& rng, const SweepOptions& options, long iteration) {
  const int V = s.V();
  const int n = data.n();
  const int P = data.P();
  const auto& priors = options.priors;
  const unsigned blocks = options.blocks;
  Eigen::MatrixXd q = precision_of(s.Sigma, 0.0);

  if (blocks & kLatents) {
    for (int j = 0; j < n; ++j) {
      for (int v = 0; v < V; ++v) {
        const auto cond = latent_conditional(s, data, q, j, v);
        s.Y(j, v) = checked(cond.mean + std::sqrt(cond.variance) * rng.normal(), "y", iteration);
      }
    }
  }
  if (blocks & kLatentSigns) {
    for (int j = 0; j < n; ++j) {
      if (rng.uniform() < sign_flip_probability(s, q, j)) s.Y.row(j) *= -1.0;
    }
  }
  if (blocks & kConstruct) {
    for (int j = 0; j < n; ++j) {
      const auto cond = construct_conditional(s, data, q, j);
      s.kappa(j) = checked(cond.mean + std::sqrt(cond.variance) * rng.normal(), "kappa", iteration);
    }
  }
  if (blocks & kConnectomeIntercept) {
    for (int v = 1; v < V; ++v) {
      for (int u = 0; u < v; ++u) {
        const auto cond = connectome_intercept_conditional(s, data, priors, u, v);
        const double d = checked(cond.mean + std::sqrt(cond.variance) * rng.normal(), "D", iteration);
        s.D(u, v) = d;
        s.D(v, u) = d;
      }
    }
  }
  if (blocks & kBehaviorIntercept) {
    for (int p = 0; p < P; ++p) {
      const auto cond = behavior_intercept_conditional(s, data, priors, p);
      s.e(p) = checked(cond.mean + std::sqrt(cond.variance) * rng.normal(), "e", iteration);
    }
  }
  if (blocks & kLatentMean) {
    const auto cond = latent_mean_conditional(s, data, q, priors);
    Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
    // x = mean + L^{-T} xi has covariance (L L^T)^{-1}.
    const Eigen::VectorXd xi = rng.normal_vector(V);
    s.latent_mean = cond.mean + llt.matrixU().solve(xi);
    for (int v = 0; v < V; ++v) checked(s.latent_mean(v), "latent mean", iteration);
  }
  if (blocks & kCovariance) {
    auto cond = covariance_conditional(s, data, priors);
    cond.scale.diagonal().array() += priors.jitter;
    s.Sigma = rng.inverse_wishart(cond.df, cond.scale);
    if (!s.Sigma.allFinite()) checked(std::numeric_limits<double>::quiet_NaN(), "Sigma", iteration);
  }
  if (blocks & kNoiseVariances) {
    const auto c = connectome_noise_conditional(s, data, priors);
    s.sigma2_c = std::max(checked(rng.inverse_gamma(c.shape, c.scale), "sigma2_c", iteration), priors.variance_floor);
    for (int p = 0; p < P; ++p) {
      const auto b = behavior_noise_conditional(s, data, priors, p);
      s.sigma2_b(p) =
          std::max(checked(rng.inverse_gamma(b.shape, b.scale), "sigma2_b", iteration), priors.variance_floor);
    }
  }
}

ModelState gibbs_step(const ModelState& state, const FitData& data, Random& rng, const SweepOptions& options) {
  ModelState next = state;
  gibbs_sweep(next, data, rng, options);
  return next;
}

double log_joint(const ModelState& s, const FitData& data, const Priors& priors) {
  const int V = s.V();
  const int n = data.n();
  const int P = data.P();
  const int d = V + 1;

  double connectome = 0.0;
  for (int j = 0; j < n; ++j) {
    const auto& c = data.connectomes[static_cast<std::size_t>(j)];
    for (int v = 1; v < V; ++v) {
      for (int u = 0; u < v; ++u) connectome += log_normal(c(u, v), s.D(u, v) + s.Y(j, u) * s.Y(j, v), s.sigma2_c);
    }
  }

  double behavior = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < P; ++p) {
      if (data.observed(j, p)) behavior += log_normal(data.behavior(j, p), s.e(p) + s.kappa(j), s.sigma2_b(p));
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(s.Sigma);
  if (llt.info() != Eigen::Success) throw SamplerError("log_joint: Sigma is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  double latent = 0.0;
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd w = lower.triangularView<Eigen::Lower>().solve(centered_latent(s, j));
    latent += -0.5 * (d * kLog2Pi + log_det + w.squaredNorm());
  }

  double hyper = 0.0;
  for (int v = 1; v < V; ++v) {
    for (int u = 0; u < v; ++u) hyper += log_normal(s.D(u, v), 0.0, priors.intercept_var);
  }
  for (int p = 0; p < P; ++p) hyper += log_normal(s.e(p), 0.0, priors.intercept_var);
  for (int v = 0; v < V; ++v) hyper += log_normal(s.latent_mean(v), 0.0, priors.latent_mean_var);

  const double df = V + priors.iw_df_offset;
  const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  hyper += 0.5 * df * d * std::log(priors.iw_scale) - 0.5 * df * d * std::numbers::ln2 -
           log_multivariate_gamma(0.5 * df, d) - 0.5 * (df + d + 1) * log_det -
           0.5 * priors.iw_scale * sigma_inv.trace();

  hyper += log_inverse_gamma(s.sigma2_c, priors.ig_shape, priors.ig_scale);
  for (int p = 0; p < P; ++p) hyper += log_inverse_gamma(s.sigma2_b(p), priors.ig_shape, priors.ig_scale);

  return connectome + behavior + latent + hyper;
}

double log_joint(const ModelState& state, const ingest::Dataset& dataset, const std::string& condition,
                 const std::string& category) {
  return log_joint(state, make_fit_data(dataset, condition, category));
}

double PosteriorDraws::mean_log_joint() const {
  if (draws.empty()) throw std::invalid_argument("no draws");
  double sum = 0.0;
  for (const auto& d : draws) sum += d.log_joint;
  return sum / static_cast<double>(draws.size());
}

PosteriorDraws run_chain(const FitData& data, const SamplerConfig& config, int chain_id,
                         const ChainOptions& options) {
  config.validate();
  const auto base = static_cast<std::uint64_t>(chain_id);
  const auto restart = static_cast<std::uint64_t>(options.restart);
  const int perturbation = (options.restart > 0 || chain_id > 0) ? 1 : 0;
  ModelState state = init_state(data, derive_seed(config.seed, {options.stream, restart, base, 0x1417}),
                                perturbation, config.priors);
  Random rng(derive_seed(config.seed, {options.stream, restart, base}));
  SweepOptions sweep{kAllBlocks, config.priors};

  PosteriorDraws out;
  out.chain_id = chain_id;
  out.restart = options.restart;
  out.tracked_subjects = options.tracked_subjects;
  out.used_fallback = state.used_fallback;
  out.draws.reserve(static_cast<std::size_t>(config.retained_per_chain()));

  const long total = config.sweeps_per_chain();
  for (long it = 1; it <= total; ++it) {
    gibbs_sweep(state, data, rng, sweep, it);
    const long post = it - config.burn_in;
    if (post <= 0 || post % config.thin != 0) continue;
    Draw d;
    d.iteration = it;
    d.log_joint = log_joint(state, data, config.priors);
    d.cross = state.cross_covariance();
    d.e = state.e;
    d.kappa.resize(static_cast<Eigen::Index>(options.tracked_subjects.size()));
    for (std::size_t t = 0; t < options.tracked_subjects.size(); ++t) {
      d.kappa(static_cast<Eigen::Index>(t)) = state.kappa(options.tracked_subjects[t]);
    }
    if (!std::isfinite(d.log_joint)) {
      throw SamplerError("non-finite log_joint at iteration " + std::to_string(it));
    }
    out.draws.push_back(std::move(d));
  }
  out.final_state = std::move(state);
  return out;
}

PosteriorDraws run_chain(const ingest::Dataset& dataset, const std::string& condition,
                         const std::string& category, const SamplerConfig& config, int chain_id) {
  return run_chain(make_fit_data(dataset, condition, category), config, chain_id);
}

Eigen::VectorXd PosteriorSummary::means() const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) m(static_cast<Eigen::Index>(i)) = nodes[i].cov_mean;
  return m;
}

PosteriorSummary posterior_summary(std::span<const PosteriorDraws> chains) {
  std::size_t total = 0;
  Eigen::Index V = 0;
  for (const auto& c : chains) {
    total += c.draws.size();
    if (!c.draws.empty()) V = c.draws.front().cross.size();
  }
  if (total == 0) throw std::invalid_argument("posterior_summary: no retained draws");

  PosteriorSummary out;
  out.nodes.resize(static_cast<std::size_t>(V));
  std::vector<double> values(total);
  for (Eigen::Index v = 0; v < V; ++v) {
    std::size_t k = 0;
    for (const auto& c : chains) {
      for (const auto& d : c.draws) values[k++] = d.cross(v);
    }
    auto& node = out.nodes[static_cast<std::size_t>(v)];
    node.node_id = static_cast<int>(v) + 1;
    node.cov_mean = stats::mean(values);
    node.cov_sd = total > 1 ? std::sqrt(std::max(stats::variance(values), 0.0)) : 0.0;
    std::sort(values.begin(), values.end());
    node.ci05 = stats::quantile_sorted(values, 0.05);
    node.ci95 = stats::quantile_sorted(values, 0.95);
  }
  return out;
}

PosteriorSummary average_summaries(std::span<const PosteriorSummary> summaries) {
  if (summaries.empty()) throw std::invalid_argument("average_summaries: nothing to average");
  PosteriorSummary out = summaries.front();
  const double k = static_cast<double>(summaries.size());
  for (std::size_t v = 0; v < out.nodes.size(); ++v) {
    double mean = 0.0, sd = 0.0, lo = 0.0, hi = 0.0;
    for (const auto& s : summaries) {
      if (s.nodes.size() != out.nodes.size()) throw std::invalid_argument("average_summaries: node count mismatch");
      mean += s.nodes[v].cov_mean;
      sd += s.nodes[v].cov_sd;
      lo += s.nodes[v].ci05;
      hi += s.nodes[v].ci95;
    }
    out.nodes[v] = {out.nodes[v].node_id, mean / k, sd / k, lo / k, hi / k};
  }
  return out;
}

void write_summary_csv(const PosteriorSummary& summary, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"node_id", "cov_mean", "cov_sd", "ci05", "ci95"});
  for (const auto& n : summary.nodes) w.row(n.node_id, n.cov_mean, n.cov_sd, n.ci05, n.ci95);
  w.close();
}

PosteriorSummary read_summary_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto id = t.column("node_id"), m = t.column("cov_mean"), sd = t.column("cov_sd"), lo = t.column("ci05"),
             hi = t.column("ci95");
  PosteriorSummary out;
  for (const auto& r : t.rows) {
    const std::string ctx = path.string();
    out.nodes.push_back({static_cast<int>(parse_int(r[id], ctx)), parse_double(r[m], ctx), parse_double(r[sd], ctx),
                         parse_double(r[lo], ctx), parse_double(r[hi], ctx)});
  }
  std::sort(out.nodes.begin(), out.nodes.end(),
            [](const NodeSummary& a, const NodeSummary& b) { return a.node_id < b.node_id; });
  return out;
}

void write_trace_csv(std::span<const PosteriorDraws> chains, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"chain", "iter", "log_joint", "node_id", "cov_draw"});
  for (const auto& c : chains) {
    for (const auto& d : c.draws) {
      for (Eigen::Index v = 0; v < d.cross.size(); ++v) {
        w.row(c.chain_id, d.iteration, d.log_joint, static_cast<int>(v) + 1, d.cross(v));
      }
    }
  }
  w.close();
}

TraceTable read_trace_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto ci = t.column("chain"), ii = t.column("iter"), li = t.column("log_joint"), ni = t.column("node_id"),
             vi = t.column("cov_draw");
  std::map<int, std::map<long, std::map<int, double>>> by_chain;
  std::map<int, std::map<long, double>> lj;
  for (const auto& r : t.rows) {
    const std::string ctx = path.string();
    const int chain = static_cast<int>(parse_int(r[ci], ctx));
    const long iter = static_cast<long>(parse_int(r[ii], ctx));
    by_chain[chain][iter][static_cast<int>(parse_int(r[ni], ctx))] = parse_double(r[vi], ctx);
    lj[chain][iter] = parse_double(r[li], ctx);
  }
  TraceTable out;
  for (const auto& [chain, iters] : by_chain) {
    out.chain_ids.push_back(chain);
    const std::size_t nodes = iters.empty() ? 0 : iters.begin()->second.size();
    std::vector<std::vector<double>> cov(nodes);
    std::vector<double> l;
    for (const auto& [iter, row] : iters) {
      if (row.size() != nodes) throw std::runtime_error(path.string() + ": ragged trace at iteration " + std::to_string(iter));
      std::size_t v = 0;
      for (const auto& [node, value] : row) cov[v++].push_back(value);
      l.push_back(lj[chain][iter]);
    }
    out.cov.push_back(std::move(cov));
    out.log_joint.push_back(std::move(l));
  }
  return out;
}

}  // namespace cpredict::model
