#include "cpredict/baselines.hpp"

#include "cpredict/random.hpp"
#include "cpredict/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cpredict::baselines {

namespace {

void require_training_rows(Eigen::Index n) {
  if (n < 10) throw std::invalid_argument("baseline fit needs at least 10 training subjects");
}

}  // namespace

Eigen::VectorXd edge_vector(const Eigen::MatrixXd& m) {
  const auto V = m.rows();
  Eigen::VectorXd out(V * (V - 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index u = 0; u < V; ++u) {
    for (Eigen::Index v = u + 1; v < V; ++v) out(k++) = m(u, v);
  }
  return out;
}

Eigen::MatrixXd edge_matrix(const ingest::Dataset& dataset, const std::string& condition,
                            const std::vector<std::string>& subjects) {
  const Eigen::Index edges = static_cast<Eigen::Index>(dataset.V) * (dataset.V - 1) / 2;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(subjects.size()), edges);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = edge_vector(dataset.connectome(subjects[i], condition).matrix).transpose();
  }
  return x;
}

EdgeAssociation edge_correlations(const Eigen::MatrixXd& edges, const Eigen::VectorXd& y) {
  const auto n = edges.rows();
  if (y.size() != n) throw std::invalid_argument("edge_correlations: row mismatch");
  if (n < 3) throw std::invalid_argument("edge_correlations: need at least 3 subjects");
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double syy = yc.squaredNorm();
  if (syy == 0.0) throw stats::UndefinedCorrelation("training outcome is constant");
  const Eigen::MatrixXd xc = edges.rowwise() - edges.colwise().mean();
  const Eigen::VectorXd sxy = xc.transpose() * yc;
  const Eigen::VectorXd sxx = xc.colwise().squaredNorm().transpose();
  EdgeAssociation out;
  out.r.resize(edges.cols());
  out.p.resize(edges.cols());
  const double df = static_cast<double>(n - 2);
  for (Eigen::Index e = 0; e < edges.cols(); ++e) {
    if (sxx(e) == 0.0) {
      out.r(e) = 0.0;
      out.p(e) = 1.0;
      continue;
    }
    const double r = std::clamp(sxy(e) / std::sqrt(sxx(e) * syy), -1.0, 1.0);
    out.r(e) = r;
    const double t = (std::abs(r) >= 1.0) ? std::numeric_limits<double>::infinity()
                                          : r * std::sqrt(df / (1.0 - r * r));
    out.p(e) = stats::t_two_sided_p(t, df);
  }
  return out;
}

CpmResult cpm_fit_predict(const Eigen::MatrixXd& train_edges, const Eigen::VectorXd& train_y,
                          const Eigen::MatrixXd& test_edges, double p_threshold) {
  const auto n = train_edges.rows();
  require_training_rows(n);
  if (test_edges.cols() != train_edges.cols()) throw std::invalid_argument("cpm: edge count mismatch");
  const auto assoc = edge_correlations(train_edges, train_y);

  CpmResult out;
  Eigen::VectorXd pos_train = Eigen::VectorXd::Zero(n), neg_train = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd pos_test = Eigen::VectorXd::Zero(test_edges.rows()),
                  neg_test = Eigen::VectorXd::Zero(test_edges.rows());
  for (Eigen::Index e = 0; e < train_edges.cols(); ++e) {
    if (!(assoc.p(e) < p_threshold)) continue;
    if (assoc.r(e) > 0.0) {
      ++out.positive_edges;
      pos_train += train_edges.col(e);
      pos_test += test_edges.col(e);
    } else if (assoc.r(e) < 0.0) {
      ++out.negative_edges;
      neg_train += train_edges.col(e);
      neg_test += test_edges.col(e);
    }
  }

  if (out.positive_edges == 0 && out.negative_edges == 0) {
    out.fallback = true;
    out.predictions = Eigen::VectorXd::Constant(test_edges.rows(), train_y.mean());
    return out;
  }

  const int q = 1 + (out.positive_edges > 0) + (out.negative_edges > 0);
  Eigen::MatrixXd design(n, q), test_design(test_edges.rows(), q);
  design.col(0).setOnes();
  test_design.col(0).setOnes();
  int col = 1;
  if (out.positive_edges > 0) {
    design.col(col) = pos_train;
    test_design.col(col++) = pos_test;
  }
  if (out.negative_edges > 0) {
    design.col(col) = neg_train;
    test_design.col(col++) = neg_test;
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(train_y);
  out.predictions = test_design * coef;
  return out;
}

Eigen::VectorXd RidgeModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), intercept);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (feature_scale(c) == 0.0) continue;
    out += beta(c) * (x.col(c).array() - feature_mean(c)).matrix() / feature_scale(c);
  }
  return out;
}

namespace {

struct StandardizedDesign {
  Eigen::MatrixXd z;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

StandardizedDesign standardize_columns(const Eigen::MatrixXd& x) {
  StandardizedDesign s;
  const auto n = x.rows();
  s.mean = x.colwise().mean().transpose();
  s.z = x.rowwise() - s.mean.transpose();
  s.scale = (s.z.colwise().squaredNorm().transpose() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)))
                .array()
                .sqrt();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (s.scale(c) > 1e-12) {
      s.z.col(c) /= s.scale(c);
    } else {
      s.scale(c) = 0.0;
      s.z.col(c).setZero();
    }
  }
  return s;
}

// beta(lambda) = V diag(s / (s^2 + lambda)) U^T yc for each lambda in `grid`.
struct RidgePath {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
  Eigen::VectorXd uty;

  RidgePath(const Eigen::MatrixXd& z, const Eigen::VectorXd& yc) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    v = svd.matrixV();
    uty = u.transpose() * yc;
  }

  Eigen::VectorXd beta(double lambda) const {
    const double tol = s.size() ? s(0) * 1e-12 * static_cast<double>(std::max(u.rows(), v.rows())) : 0.0;
    Eigen::VectorXd w(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      w(i) = s(i) > tol ? s(i) / (s(i) * s(i) + lambda) * uty(i) : 0.0;
    }
    return v * w;
  }
};

}  // namespace

RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  if (x.rows() != y.size()) throw std::invalid_argument("ridge: row mismatch");
  if (lambda < 0.0) throw std::invalid_argument("ridge: lambda must be >= 0");
  const auto sd = standardize_columns(x);
  RidgeModel m;
  m.feature_mean = sd.mean;
  m.feature_scale = sd.scale;
  m.intercept = y.mean();
  m.lambda = lambda;
  const Eigen::VectorXd yc = y.array() - m.intercept;
  m.beta = RidgePath(sd.z, yc).beta(lambda);
  return m;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = -6; k <= 12; ++k) grid.push_back(std::pow(10.0, 0.5 * k));
  return grid;
}

RidgeResult ridge_fit_predict(const Eigen::MatrixXd& train_edges, const Eigen::VectorXd& train_y,
                              const Eigen::MatrixXd& test_edges, const std::vector<double>& lambda_grid,
                              int inner_folds, std::uint64_t seed) {
  const auto n = train_edges.rows();
  require_training_rows(n);
  if (lambda_grid.empty()) throw std::invalid_argument("ridge: lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw std::invalid_argument("ridge: lambda grid values must be > 0");
  }
  if (inner_folds < 2) throw std::invalid_argument("ridge: need at least 2 inner folds");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), Random(derive_seed(seed, {0x51d9e})).engine());
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) fold[static_cast<std::size_t>(order[i])] = static_cast<int>(i) % inner_folds;

  RidgeResult out;
  out.cv_mse.assign(lambda_grid.size(), 0.0);
  for (int k = 0; k < inner_folds; ++k) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == k ? te : tr).push_back(i);
    if (te.empty()) continue;
    const Eigen::MatrixXd xtr = train_edges(tr, Eigen::all);
    const Eigen::VectorXd ytr = train_y(tr);
    const Eigen::MatrixXd xte = train_edges(te, Eigen::all);
    const Eigen::VectorXd yte = train_y(te);
    const auto sd = standardize_columns(xtr);
    const double y_mean = ytr.mean();
    const RidgePath path(sd.z, ytr.array() - y_mean);
    Eigen::MatrixXd zte = xte.rowwise() - sd.mean.transpose();
    for (Eigen::Index c = 0; c < zte.cols(); ++c) {
      if (sd.scale(c) == 0.0) zte.col(c).setZero();
      else zte.col(c) /= sd.scale(c);
    }
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
      const Eigen::VectorXd pred = (zte * path.beta(lambda_grid[g])).array() + y_mean;
      out.cv_mse[g] += (pred - yte).squaredNorm();
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    out.cv_mse[g] /= static_cast<double>(n);
    if (out.cv_mse[g] < out.cv_mse[best]) best = g;
  }
  out.lambda = lambda_grid[best];
  out.predictions = ridge_fit(train_edges, train_y, out.lambda).predict(test_edges);
  return out;
}

std::vector<Prediction> baseline_predictions(const std::string& method, const ingest::Dataset& dataset,
                                             const std::string& condition, const std::string& category,
                                             const Split& split, int repeat, const BaselineOptions& options,
                                             std::vector<std::string>* flags) {
  if (method != kMethodCpm && method != kMethodRidge) {
    throw std::invalid_argument("unknown baseline method '" + method + "'");
  }
  const auto& panel = dataset.behavior(category);
  std::vector<std::string> train_ids, test_ids;
  for (int r : split.train) train_ids.push_back(panel.subject_ids[static_cast<std::size_t>(r)]);
  for (int r : split.test) test_ids.push_back(panel.subject_ids[static_cast<std::size_t>(r)]);
  const Eigen::MatrixXd train_x = edge_matrix(dataset, condition, train_ids);
  const Eigen::MatrixXd test_x = edge_matrix(dataset, condition, test_ids);

  std::vector<Prediction> out;
  for (int p = 0; p < panel.indicator_count(); ++p) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      if (panel.observed(split.train[i], p)) rows.push_back(static_cast<Eigen::Index>(i));
    }
    const Eigen::MatrixXd x = train_x(rows, Eigen::all);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      y(static_cast<Eigen::Index>(k)) = panel.values(split.train[static_cast<std::size_t>(rows[k])], p);
    }
    Eigen::VectorXd pred;
    if (method == kMethodCpm) {
      auto res = cpm_fit_predict(x, y, test_x, options.p_threshold);
      if (res.fallback && flags) {
        flags->push_back("cpm fallback to training mean: condition=" + condition + " category=" + category +
                         " indicator=" + panel.indicators[static_cast<std::size_t>(p)] +
                         " repeat=" + std::to_string(repeat));
      }
      pred = std::move(res.predictions);
    } else {
      pred = ridge_fit_predict(x, y, test_x, options.lambda_grid, options.inner_folds,
                               derive_seed(options.seed, {static_cast<std::uint64_t>(repeat),
                                                          static_cast<std::uint64_t>(p)}))
                 .predictions;
    }
    for (std::size_t t = 0; t < test_ids.size(); ++t) {
      const int row = split.test[t];
      out.push_back({method, condition, category, panel.indicators[static_cast<std::size_t>(p)], repeat, test_ids[t],
                     pred(static_cast<Eigen::Index>(t)),
                     panel.observed(row, p) ? panel.values(row, p) : std::numeric_limits<double>::quiet_NaN()});
    }
  }
  return out;
}

}  // namespace cpredict::baselines
