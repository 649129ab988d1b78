#pragma once

// Run directories: every output file plus run_manifest.json, which records the
// configuration, input and output digests, warnings and timings.

#include "cpredict/analysis.hpp"
#include "cpredict/ingest.hpp"
#include "cpredict/model.hpp"
#include "cpredict/predict.hpp"
#include "cpredict/records.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cpredict::report {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kManifestName = "run_manifest.json";

struct NamedRegression {
  std::string name;  // file stem under regressions/
  std::string title;
  analysis::RegressionResult result;
};

struct Diagnostics {
  std::string condition;
  std::string category;
  std::vector<analysis::NodeDiagnostic> nodes;
};

/// Everything a run may emit; empty members produce no files.
struct RunContents {
  std::string command;       // simulate / fit / cv / analyze
  nlohmann::json config;     // echoed verbatim
  std::vector<std::filesystem::path> inputs;
  std::map<std::string, std::string> split_hashes;  // per category

  std::vector<Prediction> predictions;
  std::vector<predict::ConstructPrediction> construct;
  std::vector<AccuracyRecord> accuracy;
  std::map<predict::CellKey, model::PosteriorSummary> summaries;
  std::map<predict::CellKey, std::vector<model::PosteriorDraws>> traces;
  std::optional<ingest::Atlas> atlas;

  std::vector<analysis::BiomarkerSet> biomarkers;
  std::vector<analysis::SpiderRow> spider;
  std::vector<analysis::SpiderRow> rest_task;  // condition column holds "rest" / "task"
  std::vector<NamedRegression> regressions;
  std::vector<Diagnostics> diagnostics;

  std::vector<std::string> warnings;
  std::map<std::string, double> timings;  // seconds
};

struct OutputFile {
  std::string path;  // relative to the run directory, '/' separated
  std::string kind;
  std::string condition;
  std::string category;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string artifact_version = kArtifactVersion;
  std::string command;
  nlohmann::json config;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::map<std::string, std::string> split_hashes;
  std::vector<OutputFile> outputs;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  std::vector<const OutputFile*> of_kind(const std::string& kind) const;
};

/// File-name-safe form of a condition/category label.
std::string slug(const std::string& label);

/// Writes all non-empty parts of `contents` under `out_dir` (created if
/// needed; existing files are overwritten) and the manifest last.
/// I/O failures throw std::runtime_error naming the path.
RunManifest emit_run(const RunContents& contents, const std::filesystem::path& out_dir);

RunManifest read_manifest(const std::filesystem::path& run_dir);

struct VerifyResult {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Re-hashes every listed output and compares digests and sizes.
VerifyResult verify_run(const std::filesystem::path& run_dir);

}  // namespace cpredict::report
