#pragma once

#include "cpredict/ingest.hpp"
#include "cpredict/model.hpp"
#include "cpredict/records.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cpredict::analysis {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- biomarkers

struct BiomarkerSet {
  std::string condition;
  std::string category;
  std::vector<int> positive;  // node ids, cov_mean descending
  std::vector<int> negative;  // node ids, cov_mean ascending
  std::map<int, double> values;
};

/// k largest and k smallest cov_mean nodes; ties go to the lower node id.
/// The two sets are disjoint. Throws AnalysisError when V < 2k.
BiomarkerSet top_biomarkers(const model::PosteriorSummary& summary, int k = 10, std::string condition = {},
                            std::string category = {});

using NetworkCounts = std::array<double, ingest::kNetworkCount>;

NetworkCounts network_counts(const BiomarkerSet& biomarkers, const ingest::Atlas& atlas);

struct RestTaskAverage {
  NetworkCounts rest{};
  NetworkCounts task{};
};

inline constexpr std::array<std::string_view, 2> kRestConditions = {"Rest1", "Rest2"};
inline constexpr std::array<std::string_view, 4> kTaskConditions = {"gradCPT", "EN-back", "SST", "Eyes"};

RestTaskAverage rest_task_average(const std::map<std::string, NetworkCounts>& counts_by_condition);

void write_biomarkers_csv(const std::vector<BiomarkerSet>& sets, const ingest::Atlas& atlas,
                          const std::filesystem::path& path);

struct SpiderRow {
  std::string condition;
  std::string category;
  ingest::Network network;
  double count;
};
void write_spider_csv(const std::vector<SpiderRow>& rows, const std::filesystem::path& path);

// --------------------------------------------------------------- regression

struct RegressionTerm {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;
  std::string sig_code;
};

struct RegressionResult {
  std::vector<RegressionTerm> terms;
  double r_squared = 0.0;
  double f_statistic = 0.0;
  double f_p_value = 1.0;
  double residual_sd = 0.0;
  int n = 0;
  int residual_df = 0;

  const RegressionTerm& term(std::string_view name) const;
};

/// '***' p < 0.001, '**' p < 0.01, '*' p < 0.05, '.' p < 0.1, else ' '.
std::string sig_code(double p);

inline constexpr std::string_view kSignifLegend = "Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1";

/// Least squares with an intercept column in `design` (column 0 by
/// convention; R^2 is centered). Throws AnalysisError naming collinear
/// columns when the design is rank deficient, or when n <= q.
RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const std::vector<std::string>& names);

inline constexpr std::string_view kReferenceCondition = "Rest1";
inline constexpr std::array<std::string_view, 7> kConditionLevels = {"Rest1", "Rest2", "Average", "EN-back",
                                                                     "SST",   "Eyes",  "gradCPT"};

struct ConditionEffectModel {
  std::string method;
  std::string category;
  std::string reference_condition{kReferenceCondition};
  RegressionResult result;
};

/// accuracy ~ Intercept + one dummy per non-reference condition. Records
/// must share one method and category and cover all seven levels.
ConditionEffectModel condition_effect_regression(const std::vector<AccuracyRecord>& records);

/// cov ~ Intercept + dummies for the nine non-Default-Mode networks.
RegressionResult label_effect_regression(const std::map<int, double>& node_cov, const ingest::Atlas& atlas,
                                         bool use_absolute);

nlohmann::json to_json(const RegressionResult& r);
std::string render_text(const RegressionResult& r, const std::string& title);

// -------------------------------------------------------------- diagnostics

/// Split R-hat: each chain halved, then the between/within variance ratio.
double rhat(const std::vector<std::vector<double>>& chains);

/// Effective sample size with Geyer's initial monotone positive sequence;
/// never exceeds the chain length.
double ess(const std::vector<double>& chain);

struct NodeDiagnostic {
  int node_id = 0;
  double rhat = 0.0;  // NaN with a single chain
  double ess = 0.0;   // summed over chains
};

std::vector<NodeDiagnostic> diagnose(const model::TraceTable& trace);

}  // namespace cpredict::analysis
