#include "cpredict/analysis.hpp"

#include "cpredict/csv.hpp"
#include "cpredict/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

namespace cpredict::analysis {

using ingest::Network;

BiomarkerSet top_biomarkers(const model::PosteriorSummary& summary, int k, std::string condition,
                            std::string category) {
  if (k < 0) throw AnalysisError("top_biomarkers: k must be >= 0");
  const int V = static_cast<int>(summary.nodes.size());
  if (V < 2 * k) {
    throw AnalysisError("top_biomarkers: need at least " + std::to_string(2 * k) + " nodes, have " +
                        std::to_string(V));
  }
  BiomarkerSet out;
  out.condition = std::move(condition);
  out.category = std::move(category);
  std::vector<const model::NodeSummary*> nodes;
  for (const auto& n : summary.nodes) {
    if (!out.values.emplace(n.node_id, n.cov_mean).second) {
      throw AnalysisError("top_biomarkers: duplicate node " + std::to_string(n.node_id));
    }
    nodes.push_back(&n);
  }

  auto desc = nodes;
  std::sort(desc.begin(), desc.end(), [](auto* a, auto* b) {
    return a->cov_mean != b->cov_mean ? a->cov_mean > b->cov_mean : a->node_id < b->node_id;
  });
  std::set<int> chosen;
  for (int i = 0; i < k; ++i) {
    out.positive.push_back(desc[static_cast<std::size_t>(i)]->node_id);
    chosen.insert(out.positive.back());
  }
  auto asc = nodes;
  std::sort(asc.begin(), asc.end(), [](auto* a, auto* b) {
    return a->cov_mean != b->cov_mean ? a->cov_mean < b->cov_mean : a->node_id < b->node_id;
  });
  for (auto* n : asc) {
    if (static_cast<int>(out.negative.size()) == k) break;
    if (!chosen.count(n->node_id)) out.negative.push_back(n->node_id);
  }
  return out;
}

NetworkCounts network_counts(const BiomarkerSet& biomarkers, const ingest::Atlas& atlas) {
  NetworkCounts counts{};
  for (const auto* set : {&biomarkers.positive, &biomarkers.negative}) {
    for (int id : *set) counts[static_cast<std::size_t>(atlas.network_of(id))] += 1.0;
  }
  return counts;
}

RestTaskAverage rest_task_average(const std::map<std::string, NetworkCounts>& by_condition) {
  auto average = [&](auto names) {
    NetworkCounts avg{};
    for (auto name : names) {
      auto it = by_condition.find(std::string(name));
      if (it == by_condition.end()) throw AnalysisError("rest_task_average: missing condition '" + std::string(name) + "'");
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += it->second[i];
    }
    for (auto& v : avg) v /= static_cast<double>(names.size());
    return avg;
  };
  return {average(kRestConditions), average(kTaskConditions)};
}

void write_biomarkers_csv(const std::vector<BiomarkerSet>& sets, const ingest::Atlas& atlas,
                          const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"condition", "category", "rank", "sign", "node_id", "network", "cov_mean"});
  for (const auto& s : sets) {
    for (const auto& [sign, ids] : {std::pair{"positive", &s.positive}, std::pair{"negative", &s.negative}}) {
      for (std::size_t r = 0; r < ids->size(); ++r) {
        const int id = (*ids)[r];
        w.row(s.condition, s.category, static_cast<int>(r) + 1, sign, id, ingest::network_name(atlas.network_of(id)),
              s.values.at(id));
      }
    }
  }
  w.close();
}

void write_spider_csv(const std::vector<SpiderRow>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"condition", "category", "network", "count"});
  for (const auto& r : rows) w.row(r.condition, r.category, ingest::network_name(r.network), r.count);
  w.close();
}

const RegressionTerm& RegressionResult::term(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t;
  }
  throw AnalysisError("no regression term '" + std::string(name) + "'");
}

std::string sig_code(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return " ";
}

RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  const auto n = X.rows();
  const auto q = X.cols();
  if (y.size() != n) throw AnalysisError("ols: response has " + std::to_string(y.size()) + " rows, design " + std::to_string(n));
  if (static_cast<Eigen::Index>(names.size()) != q) throw AnalysisError("ols: one name per design column required");
  if (n <= q) throw AnalysisError("ols: need more observations (" + std::to_string(n) + ") than terms (" + std::to_string(q) + ")");
  if (!y.allFinite() || !X.allFinite()) throw AnalysisError("ols: non-finite input");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < q) {
    // Columns pivoted past the numerical rank are linear combinations of the rest.
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < q; ++i) {
      cols += (cols.empty() ? "" : ", ") + names[static_cast<std::size_t>(perm(i))];
    }
    throw AnalysisError("ols: design is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                        std::to_string(q) + "); collinear column(s): " + cols);
  }

  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  const double sse = resid.squaredNorm();
  const double sst = (y.array() - y.mean()).matrix().squaredNorm();
  const int df = static_cast<int>(n - q);
  const double s2 = sse / df;

  // (X'X)^{-1} = P R^{-1} R^{-T} P'
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  const auto P = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = P * inner * P.transpose();

  RegressionResult out;
  out.n = static_cast<int>(n);
  out.residual_df = df;
  out.residual_sd = std::sqrt(s2);
  for (Eigen::Index j = 0; j < q; ++j) {
    RegressionTerm t;
    t.name = names[static_cast<std::size_t>(j)];
    t.estimate = beta(j);
    t.std_error = std::sqrt(std::max(s2 * xtx_inv(j, j), 0.0));
    if (t.std_error > 0.0) {
      t.t_value = t.estimate / t.std_error;
      t.p_value = stats::t_two_sided_p(t.t_value, df);
    } else if (t.estimate == 0.0) {
      t.t_value = 0.0;
      t.p_value = 1.0;
    } else {
      t.t_value = std::copysign(std::numeric_limits<double>::infinity(), t.estimate);
      t.p_value = 0.0;
    }
    t.sig_code = sig_code(t.p_value);
    out.terms.push_back(std::move(t));
  }

  out.r_squared = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : 0.0;
  const auto df1 = static_cast<double>(q - 1);
  if (df1 > 0 && sst > 0.0) {
    const double ssr = std::max(sst - sse, 0.0);
    if (sse > 0.0) {
      out.f_statistic = (ssr / df1) / s2;
      out.f_p_value = stats::f_upper_p(out.f_statistic, df1, df);
    } else {
      out.f_statistic = std::numeric_limits<double>::infinity();
      out.f_p_value = 0.0;
    }
  } else {
    out.f_statistic = 0.0;
    out.f_p_value = 1.0;
  }
  return out;
}

ConditionEffectModel condition_effect_regression(const std::vector<AccuracyRecord>& records) {
  if (records.empty()) throw AnalysisError("condition_effect_regression: no records");
  ConditionEffectModel m;
  m.method = records.front().method;
  m.category = records.front().category;
  std::set<std::string> present;
  for (const auto& r : records) {
    if (r.method != m.method || r.category != m.category) {
      throw AnalysisError("condition_effect_regression: records mix methods or categories");
    }
    if (std::find(kConditionLevels.begin(), kConditionLevels.end(), r.condition) == kConditionLevels.end()) {
      throw AnalysisError("condition_effect_regression: unknown condition '" + r.condition + "'");
    }
    present.insert(r.condition);
  }
  std::string missing;
  for (auto level : kConditionLevels) {
    if (!present.count(std::string(level))) missing += (missing.empty() ? "" : ", ") + std::string(level);
  }
  if (!missing.empty()) throw AnalysisError("condition_effect_regression: missing condition level(s): " + missing);

  const auto n = static_cast<Eigen::Index>(records.size());
  const auto q = static_cast<Eigen::Index>(kConditionLevels.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd y(n);
  std::vector<std::string> names{"Intercept"};
  for (std::size_t l = 1; l < kConditionLevels.size(); ++l) names.emplace_back(kConditionLevels[l]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    y(i) = r.r;
    X(i, 0) = 1.0;
    const auto pos = std::find(kConditionLevels.begin(), kConditionLevels.end(), r.condition) - kConditionLevels.begin();
    if (pos > 0) X(i, pos) = 1.0;
  }
  m.result = ols(y, X, names);
  return m;
}

RegressionResult label_effect_regression(const std::map<int, double>& node_cov, const ingest::Atlas& atlas,
                                         bool use_absolute) {
  const int V = atlas.node_count();
  const auto n = static_cast<Eigen::Index>(V);
  const auto q = static_cast<Eigen::Index>(ingest::kNetworkCount);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd y(n);
  std::vector<std::string> names{"Intercept"};
  for (std::size_t k = 1; k < ingest::kNetworkCount; ++k) names.emplace_back(ingest::network_name(ingest::kAllNetworks[k]));
  for (int id = 1; id <= V; ++id) {
    auto it = node_cov.find(id);
    if (it == node_cov.end()) throw AnalysisError("label_effect_regression: node " + std::to_string(id) + " has no estimate");
    const auto i = static_cast<Eigen::Index>(id - 1);
    y(i) = use_absolute ? std::abs(it->second) : it->second;
    X(i, 0) = 1.0;
    const auto net = static_cast<Eigen::Index>(atlas.network_of(id));
    if (net > 0) X(i, net) = 1.0;
  }
  if (node_cov.size() != static_cast<std::size_t>(V)) {
    throw AnalysisError("label_effect_regression: estimates for nodes outside the atlas");
  }
  return ols(y, X, names);
}

nlohmann::json to_json(const RegressionResult& r) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v > 0 ? "Inf" : "-Inf");
  };
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : r.terms) {
    terms.push_back({{"term", t.name},
                     {"estimate", number(t.estimate)},
                     {"std_error", number(t.std_error)},
                     {"t_value", number(t.t_value)},
                     {"p_value", number(t.p_value)},
                     {"sig_code", t.sig_code}});
  }
  return {{"coefficients", terms},
          {"r_squared", number(r.r_squared)},
          {"f_statistic", number(r.f_statistic)},
          {"f_p_value", number(r.f_p_value)},
          {"residual_sd", number(r.residual_sd)},
          {"n", r.n},
          {"residual_df", r.residual_df}};
}

namespace {

std::string fmt_p(double p) {
  char buf[32];
  if (p < 2e-16) return "<2e-16";
  std::snprintf(buf, sizeof buf, p < 1e-4 ? "%.2e" : "%.4f", p);
  return buf;
}

}  // namespace

std::string render_text(const RegressionResult& r, const std::string& title) {
  std::string out = title + "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %12s %12s %9s %10s\n", "", "Estimate", "Std. Error", "t value", "Pr(>|t|)");
  out += buf;
  for (const auto& t : r.terms) {
    std::snprintf(buf, sizeof buf, "%-22s %12.6f %12.6f %9.3f %10s %s\n", t.name.c_str(), t.estimate, t.std_error,
                  t.t_value, fmt_p(t.p_value).c_str(), t.sig_code.c_str());
    out += buf;
  }
  out += "---\n";
  out += kSignifLegend;
  out += "\n\n";
  std::snprintf(buf, sizeof buf, "Residual standard error: %.6g on %d degrees of freedom\n", r.residual_sd,
                r.residual_df);
  out += buf;
  std::snprintf(buf, sizeof buf, "R-squared: %.4f %s\n", r.r_squared, sig_code(r.f_p_value).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "F-statistic: %.4g on %d and %d DF, p-value: %s\n", r.f_statistic,
                static_cast<int>(r.terms.size()) - 1, r.residual_df, fmt_p(r.f_p_value).c_str());
  out += buf;
  return out;
}

double rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw AnalysisError("rhat: need at least 2 chains");
  const std::size_t len = chains.front().size();
  if (len < 4) throw AnalysisError("rhat: chains must have at least 4 draws");
  for (const auto& c : chains) {
    if (c.size() != len) throw AnalysisError("rhat: chains differ in length");
  }
  const std::size_t half = len / 2;
  std::vector<std::span<const double>> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.data(), half);
    parts.emplace_back(c.data() + (len - half), half);
  }
  double lo = chains.front().front(), hi = lo;
  for (const auto& c : chains) {
    const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
  }
  if (lo == hi) throw AnalysisError("rhat: pooled draws are constant");

  const double n = static_cast<double>(half);
  const double m = static_cast<double>(parts.size());
  std::vector<double> means, vars;
  for (auto p : parts) {
    means.push_back(stats::mean(p));
    vars.push_back(stats::variance(p));
  }
  const double grand = stats::mean(means);
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= n / (m - 1.0);
  const double W = stats::mean(vars);
  if (W == 0.0) return std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

double ess(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 10) throw AnalysisError("ess: need at least 10 draws");
  const double mu = stats::mean(x);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mu) * (x[i + lag] - mu);
    return s / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (g0 == 0.0) throw AnalysisError("ess: chain is constant");

  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / g0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);  // monotone
    prev = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1e-12);
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n));
}

std::vector<NodeDiagnostic> diagnose(const model::TraceTable& trace) {
  std::vector<NodeDiagnostic> out;
  if (trace.cov.empty()) return out;
  const std::size_t V = trace.cov.front().size();
  for (std::size_t v = 0; v < V; ++v) {
    NodeDiagnostic d;
    d.node_id = static_cast<int>(v) + 1;
    std::vector<std::vector<double>> chains;
    for (const auto& c : trace.cov) chains.push_back(c[v]);
    try {
      d.rhat = chains.size() >= 2 ? rhat(chains) : std::numeric_limits<double>::quiet_NaN();
    } catch (const AnalysisError&) {
      d.rhat = std::numeric_limits<double>::quiet_NaN();
    }
    for (const auto& c : chains) {
      try {
        d.ess += ess(c);
      } catch (const AnalysisError&) {
      }
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace cpredict::analysis
