#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpredict::ingest {

/// Thrown for values outside a function's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for any malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Canonical functional networks of the 268-node parcellation. Order is the
// order used for every count table and for regression dummy columns.
enum class Network : int {
  DefaultMode = 0,
  MedialFrontal,
  FrontoParietal,
  Motor,
  VisualI,
  VisualII,
  VisualAssociation,
  Limbic,
  BasalGanglia,
  Cerebellum,
};

inline constexpr std::size_t kNetworkCount = 10;

inline constexpr std::array<Network, kNetworkCount> kAllNetworks = {
    Network::DefaultMode,  Network::MedialFrontal,     Network::FrontoParietal,
    Network::Motor,        Network::VisualI,           Network::VisualII,
    Network::VisualAssociation, Network::Limbic,       Network::BasalGanglia,
    Network::Cerebellum};

std::string_view network_name(Network n);

/// Case-sensitive lookup of a canonical network name.
std::optional<Network> parse_network(std::string_view name);

struct AtlasEntry {
  int node_id = 0;
  Network network = Network::DefaultMode;
  std::optional<std::string> hemisphere;
  std::optional<std::array<double, 3>> coords;  // MNI mm
};

struct Atlas {
  std::vector<AtlasEntry> entries;  // sorted by node_id, ids are 1..V

  int node_count() const { return static_cast<int>(entries.size()); }
  Network network_of(int node_id) const;
};

/// Checks that node ids are exactly 1..V; sorts entries by id.
void validate_atlas(Atlas& atlas);

Atlas read_atlas(const std::filesystem::path& path);
void write_atlas(const Atlas& atlas, const std::filesystem::path& path);

struct Connectome {
  std::string subject_id;
  std::string condition;
  Eigen::MatrixXd matrix;  // Fisher-z, symmetric, zero diagonal
};

struct IndicatorScaling {
  double mean = 0.0;
  double sd = 1.0;
};

/// Subjects x indicators for one behavior category. Missing cells hold NaN
/// and are false in `observed`.
struct BehaviorPanel {
  std::string category;
  std::vector<std::string> subject_ids;
  std::vector<std::string> indicators;
  Eigen::MatrixXd values;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
  std::vector<IndicatorScaling> scaling;  // empty until standardized

  int subject_count() const { return static_cast<int>(subject_ids.size()); }
  int indicator_count() const { return static_cast<int>(indicators.size()); }
  bool standardized() const { return !scaling.empty(); }
  std::optional<int> row_of(std::string_view subject_id) const;

  /// Copy with the given rows marked missing.
  BehaviorPanel masked(const std::vector<int>& rows) const;
};

BehaviorPanel read_behavior_panel(const std::filesystem::path& path, std::string category);
void write_behavior_panel(const BehaviorPanel& panel, const std::filesystem::path& path);

struct Dataset {
  int V = 0;
  std::vector<std::string> conditions;
  std::map<std::pair<std::string, std::string>, Connectome> connectomes;  // (subject, condition)
  std::map<std::string, BehaviorPanel> behaviors;
  Atlas atlas;

  const Connectome& connectome(const std::string& subject, const std::string& condition) const;
  bool has_connectome(const std::string& subject, const std::string& condition) const;
  const BehaviorPanel& behavior(const std::string& category) const;
  /// Distinct subject ids across connectomes, sorted.
  std::vector<std::string> subjects() const;
};

enum class Scale { Pearson, FisherZ };

double fisher_z(double r);
/// fisher_z that reports `cell` in the domain error message.
double fisher_z(double r, std::string_view cell);

inline constexpr double kAsymmetryTolerance = 1e-6;

/// Validates and canonicalizes a raw matrix: Fisher-z (for Pearson input),
/// symmetrization, zero diagonal. `origin` names the source in errors.
Eigen::MatrixXd prepare_connectome(const Eigen::MatrixXd& raw, Scale scale, std::string_view origin);

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path);

/// Loads a manifest-described dataset. Relative paths in the manifest are
/// resolved against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Column-wise z-scoring with the sample (n-1) standard deviation over
/// observed entries. Scaling is recorded for de-standardizing predictions.
BehaviorPanel standardize_behaviors(const BehaviorPanel& panel);

inline constexpr std::string_view kAverageCondition = "Average";

/// Elementwise mean over `sources` for every subject, labeled "Average".
std::map<std::string, Connectome> average_condition(const Dataset& dataset,
                                                    const std::vector<std::string>& sources);

/// Inserts the averaged condition into `dataset`.
void add_average_condition(Dataset& dataset, const std::vector<std::string>& sources);

}  // namespace cpredict::ingest
