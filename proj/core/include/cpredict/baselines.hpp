#pragma once

// Reference predictors over vectorized upper-triangle edges: connectome-based
// predictive modeling (CPM) and ridge regression.

#include "cpredict/ingest.hpp"
#include "cpredict/records.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace cpredict::baselines {

/// Upper triangle (u < v), row-major: (0,1), (0,2), ..., (1,2), ...
Eigen::VectorXd edge_vector(const Eigen::MatrixXd& matrix);

/// One row per subject, in the given order.
Eigen::MatrixXd edge_matrix(const ingest::Dataset& dataset, const std::string& condition,
                            const std::vector<std::string>& subjects);

struct EdgeAssociation {
  Eigen::VectorXd r;
  Eigen::VectorXd p;  // two-sided, t distribution on n - 2 df
};

EdgeAssociation edge_correlations(const Eigen::MatrixXd& edges, const Eigen::VectorXd& y);

struct CpmResult {
  Eigen::VectorXd predictions;
  int positive_edges = 0;
  int negative_edges = 0;
  bool fallback = false;  // no edge passed; predictions are the training mean
};

CpmResult cpm_fit_predict(const Eigen::MatrixXd& train_edges, const Eigen::VectorXd& train_y,
                          const Eigen::MatrixXd& test_edges, double p_threshold = 0.001);

struct RidgeModel {
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;  // 0 marks a constant (dropped) feature
  Eigen::VectorXd beta;           // on standardized features
  double intercept = 0.0;
  double lambda = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// Closed-form ridge on training-standardized features with an unpenalized
/// intercept. lambda = 0 gives the minimum-norm least-squares solution.
RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);

struct RidgeResult {
  Eigen::VectorXd predictions;
  double lambda = 0.0;
  std::vector<double> cv_mse;  // per grid value
};

/// Chooses lambda by inner K-fold CV on the training rows (squared error),
/// refits on all training rows and predicts the test rows.
RidgeResult ridge_fit_predict(const Eigen::MatrixXd& train_edges, const Eigen::VectorXd& train_y,
                              const Eigen::MatrixXd& test_edges, const std::vector<double>& lambda_grid,
                              int inner_folds = 5, std::uint64_t seed = 0);

/// 10^-3 .. 10^6 in half-decade steps.
std::vector<double> default_lambda_grid();

struct BaselineOptions {
  double p_threshold = 0.001;
  std::vector<double> lambda_grid = default_lambda_grid();
  int inner_folds = 5;
  std::uint64_t seed = 0;
};

/// Fits `method` (cpm or ridge) per indicator on the training rows of `split`
/// and predicts every test subject. Training rows with a missing indicator
/// are skipped for that indicator. `flags` receives one line per CPM fallback.
std::vector<Prediction> baseline_predictions(const std::string& method, const ingest::Dataset& dataset,
                                             const std::string& condition, const std::string& category,
                                             const Split& split, int repeat, const BaselineOptions& options,
                                             std::vector<std::string>* flags = nullptr);

}  // namespace cpredict::baselines
