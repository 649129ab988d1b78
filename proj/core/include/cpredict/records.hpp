#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cpredict {

inline constexpr const char* kMethodLatent = "latentsna";
inline constexpr const char* kMethodCpm = "cpm";
inline constexpr const char* kMethodRidge = "ridge";

/// One held-out prediction. `observed` is NaN when the indicator is missing.
struct Prediction {
  std::string method;
  std::string condition;
  std::string category;
  std::string indicator;
  int repeat = 0;
  std::string subject_id;
  double predicted = 0.0;
  double observed = 0.0;
};

struct AccuracyRecord {
  std::string method;
  std::string condition;
  std::string category;
  std::string indicator;
  int repeat = 0;
  double r = 0.0;
  int n_test = 0;
};

struct AccuracyMean {
  std::string method;
  std::string condition;
  std::string category;
  std::string indicator;
  double mean_r = 0.0;
  double sd_r = 0.0;
  int repeats = 0;
};

void write_predictions_csv(const std::vector<Prediction>& rows, const std::filesystem::path& path);
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path);

void write_accuracy_csv(const std::vector<AccuracyRecord>& rows, const std::filesystem::path& path);
std::vector<AccuracyRecord> read_accuracy_csv(const std::filesystem::path& path);
void write_accuracy_mean_csv(const std::vector<AccuracyMean>& rows, const std::filesystem::path& path);

}  // namespace cpredict

namespace cpredict {

/// Row indices (into a behavior panel) for one train/test partition.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

}  // namespace cpredict
