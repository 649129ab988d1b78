#pragma once

// Cross-validated, semi-supervised behavior prediction: test subjects keep
// their connectomes in the fit but have every indicator masked.

#include "cpredict/baselines.hpp"
#include "cpredict/ingest.hpp"
#include "cpredict/model.hpp"
#include "cpredict/records.hpp"
#include "cpredict/stats.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cpredict::predict {

using stats::pearson;

struct SplitPlan {
  std::vector<Split> repeats;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  bool partitioned = false;

  /// SHA-256 over the canonical text of every repeat; shared by all methods
  /// fitted on this plan.
  std::string hash() const;
};

/// Repeated random train/test splits, |train| = round(train_fraction * n).
/// With `partitioned`, test sets are the disjoint blocks of one shuffled
/// order (K-fold with K = repeats); train size is then n minus the block.
/// Throws std::invalid_argument for n < 10 or train_fraction outside (0.5, 0.95).
SplitPlan split_folds(int n_subjects, double train_fraction = 0.9, int repeats = 5, std::uint64_t seed = 0,
                      bool partitioned = false);

enum class SelectBy { TrainFit, TestFit };

std::string to_string(SelectBy s);
SelectBy parse_select_by(const std::string& text);

struct FitOptions {
  SelectBy select_by = SelectBy::TrainFit;
  int repeat = 0;
  unsigned threads = 1;
  bool keep_draws = true;  // false drops per-draw storage of the selected chains
};

struct ConstructPrediction {
  std::string condition;
  std::string category;
  int repeat = 0;
  std::string subject_id;
  double kappa_mean = 0.0;  // standardized construct scale
};

struct RestartScore {
  int restart = 0;
  double score = 0.0;  // larger is better
};

struct FitResult {
  std::vector<Prediction> predictions;
  std::vector<ConstructPrediction> construct;
  model::PosteriorSummary summary;
  std::vector<model::PosteriorDraws> chains;  // selected restart
  std::vector<RestartScore> scores;
  int selected_restart = 0;
};

/// Fits `inits` restarts x `chains` chains with the test rows masked and
/// predicts each test subject's indicators as the posterior mean of
/// e_p + kappa_j on the original scale. TrainFit selection ranks restarts by
/// mean training log joint; TestFit by negative test MSE (standardized).
FitResult fit_predict(const ingest::Dataset& dataset, const std::string& condition, const std::string& category,
                      const Split& split, const model::SamplerConfig& config, const FitOptions& options = {});

/// Fits every subject (no masking) and keeps the best restart by mean
/// training log joint. `predictions` and `construct` stay empty.
FitResult fit_full(const ingest::Dataset& dataset, const std::string& condition, const std::string& category,
                   const model::SamplerConfig& config, unsigned threads = 1);

/// Expected cells of an accuracy table.
struct AccuracyGrid {
  std::vector<std::string> methods;
  std::vector<std::string> conditions;
  std::map<std::string, std::vector<std::string>> indicators;  // per category
  int repeats = 0;
};

struct AccuracyTable {
  std::vector<AccuracyRecord> records;
  std::vector<AccuracyMean> means;
  std::vector<std::string> notes;  // cells whose predictions were constant (r recorded as 0)
};

/// One Pearson r per (method, condition, category, indicator, repeat) over
/// test subjects with an observed value, plus the mean over repeats. When
/// `grid` is given every expected cell must be present; missing cells are
/// listed in the thrown ingest::DataError.
AccuracyTable accuracy_table(const std::vector<Prediction>& predictions, const AccuracyGrid* grid = nullptr);

std::vector<AccuracyMean> mean_over_repeats(const std::vector<AccuracyRecord>& records);

struct CvConfig {
  std::vector<std::string> conditions;
  std::vector<std::string> categories;
  std::vector<std::string> methods{kMethodLatent, kMethodCpm, kMethodRidge};
  double train_fraction = 0.9;
  int repeats = 5;
  bool partitioned = false;
  model::SamplerConfig sampler;
  SelectBy select_by = SelectBy::TrainFit;
  baselines::BaselineOptions baseline;
  unsigned threads = 1;
};

using CellKey = std::pair<std::string, std::string>;  // (condition, category)

struct CvResult {
  std::map<std::string, SplitPlan> plans;  // per category
  std::vector<Prediction> predictions;
  std::vector<ConstructPrediction> construct;
  AccuracyTable accuracy;
  std::map<CellKey, model::PosteriorSummary> summaries;              // averaged over repeats
  std::map<CellKey, std::vector<model::PosteriorDraws>> traces;      // repeat 0, selected restart
  std::map<CellKey, std::vector<std::vector<RestartScore>>> scores;  // per repeat
  std::vector<std::string> flags;
};

/// Full protocol: one split plan per category (seeded by sampler.seed),
/// shared by every method, then fits, accuracy and repeat-averaged summaries.
CvResult cross_validate(const ingest::Dataset& dataset, const CvConfig& config);

void write_construct_csv(const std::vector<ConstructPrediction>& rows, const std::filesystem::path& path);

}  // namespace cpredict::predict
