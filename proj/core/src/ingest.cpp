#include "cpredict/ingest.hpp"

#include "cpredict/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace cpredict::ingest {

namespace {

constexpr std::array<std::string_view, kNetworkCount> kNetworkNames = {
    "Default Mode",      "Medial Frontal", "Fronto-parietal", "Motor",        "Visual I",
    "Visual II",         "Visual Association", "Limbic",      "Basal Ganglia", "Cerebellum"};

std::string cell_label(std::string_view origin, Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << origin << " cell (" << r + 1 << "," << c + 1 << ")";
  return os.str();
}

}  // namespace

std::string_view network_name(Network n) { return kNetworkNames[static_cast<std::size_t>(n)]; }

std::optional<Network> parse_network(std::string_view name) {
  for (std::size_t i = 0; i < kNetworkNames.size(); ++i) {
    if (kNetworkNames[i] == name) return static_cast<Network>(i);
  }
  return std::nullopt;
}

Network Atlas::network_of(int node_id) const {
  if (node_id < 1 || node_id > node_count()) {
    throw DataError("node " + std::to_string(node_id) + " is not in the atlas");
  }
  return entries[static_cast<std::size_t>(node_id - 1)].network;
}

void validate_atlas(Atlas& atlas) {
  std::sort(atlas.entries.begin(), atlas.entries.end(),
            [](const AtlasEntry& a, const AtlasEntry& b) { return a.node_id < b.node_id; });
  for (std::size_t i = 0; i < atlas.entries.size(); ++i) {
    const int expected = static_cast<int>(i) + 1;
    if (atlas.entries[i].node_id != expected) {
      throw DataError("atlas node ids must be exactly 1..V; expected " + std::to_string(expected) +
                      ", found " + std::to_string(atlas.entries[i].node_id));
    }
  }
}

Atlas read_atlas(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const auto id_col = table.column("node_id");
  const auto net_col = table.column("network");
  std::optional<std::size_t> hemi_col, x_col, y_col, z_col;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == "hemisphere") hemi_col = i;
    if (table.header[i] == "x") x_col = i;
    if (table.header[i] == "y") y_col = i;
    if (table.header[i] == "z") z_col = i;
  }
  Atlas atlas;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string ctx = path.string() + ":" + std::to_string(r + 2);
    if (row.size() < table.header.size()) throw DataError(ctx + ": short row");
    AtlasEntry e;
    e.node_id = static_cast<int>(parse_int(row[id_col], ctx));
    auto net = parse_network(row[net_col]);
    if (!net) throw DataError(ctx + ": unknown network '" + row[net_col] + "'");
    e.network = *net;
    if (hemi_col && !row[*hemi_col].empty()) e.hemisphere = row[*hemi_col];
    if (x_col && y_col && z_col && !row[*x_col].empty()) {
      e.coords = std::array<double, 3>{parse_double(row[*x_col], ctx), parse_double(row[*y_col], ctx),
                                       parse_double(row[*z_col], ctx)};
    }
    atlas.entries.push_back(std::move(e));
  }
  validate_atlas(atlas);
  return atlas;
}

void write_atlas(const Atlas& atlas, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"node_id", "network", "hemisphere", "x", "y", "z"});
  for (const auto& e : atlas.entries) {
    const std::string hemi = e.hemisphere.value_or("");
    if (e.coords) {
      w.row(e.node_id, network_name(e.network), hemi, (*e.coords)[0], (*e.coords)[1], (*e.coords)[2]);
    } else {
      w.row(e.node_id, network_name(e.network), hemi, "", "", "");
    }
  }
  w.close();
}

std::optional<int> BehaviorPanel::row_of(std::string_view subject_id) const {
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    if (subject_ids[i] == subject_id) return static_cast<int>(i);
  }
  return std::nullopt;
}

BehaviorPanel BehaviorPanel::masked(const std::vector<int>& rows) const {
  BehaviorPanel out = *this;
  for (int r : rows) {
    for (int p = 0; p < indicator_count(); ++p) {
      out.values(r, p) = std::numeric_limits<double>::quiet_NaN();
      out.observed(r, p) = false;
    }
  }
  return out;
}

BehaviorPanel read_behavior_panel(const std::filesystem::path& path, std::string category) {
  const auto table = read_csv(path);
  if (table.header.empty() || table.header.front() != "subject_id") {
    throw DataError(path.string() + ": header must start with subject_id");
  }
  BehaviorPanel panel;
  panel.category = std::move(category);
  panel.indicators.assign(table.header.begin() + 1, table.header.end());
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto P = static_cast<Eigen::Index>(panel.indicators.size());
  panel.values.setConstant(n, P, std::numeric_limits<double>::quiet_NaN());
  panel.observed.setConstant(n, P, false);
  std::set<std::string> seen;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string ctx = path.string() + ":" + std::to_string(i + 2);
    if (static_cast<Eigen::Index>(row.size()) > P + 1) throw DataError(ctx + ": too many fields");
    if (!seen.insert(row[0]).second) throw DataError(ctx + ": duplicate subject '" + row[0] + "'");
    panel.subject_ids.push_back(row[0]);
    for (Eigen::Index p = 0; p < P; ++p) {
      const auto idx = static_cast<std::size_t>(p + 1);
      if (idx >= row.size() || row[idx].empty() || row[idx] == "NA") continue;
      const double v = parse_double(row[idx], ctx);
      if (!std::isfinite(v)) throw DataError(ctx + ": non-finite behavior value");
      panel.values(i, p) = v;
      panel.observed(i, p) = true;
    }
  }
  return panel;
}

void write_behavior_panel(const BehaviorPanel& panel, const std::filesystem::path& path) {
  CsvWriter w(path);
  std::vector<std::string> header{"subject_id"};
  header.insert(header.end(), panel.indicators.begin(), panel.indicators.end());
  w.header(header);
  for (int i = 0; i < panel.subject_count(); ++i) {
    std::string line = panel.subject_ids[static_cast<std::size_t>(i)];
    for (int p = 0; p < panel.indicator_count(); ++p) {
      line += ',';
      if (panel.observed(i, p)) line += format_double(panel.values(i, p));
    }
    w.row(line);
  }
  w.close();
}

const Connectome& Dataset::connectome(const std::string& subject, const std::string& condition) const {
  auto it = connectomes.find({subject, condition});
  if (it == connectomes.end()) {
    throw DataError("no connectome for subject '" + subject + "' under condition '" + condition + "'");
  }
  return it->second;
}

bool Dataset::has_connectome(const std::string& subject, const std::string& condition) const {
  return connectomes.count({subject, condition}) > 0;
}

const BehaviorPanel& Dataset::behavior(const std::string& category) const {
  auto it = behaviors.find(category);
  if (it == behaviors.end()) throw DataError("unknown behavior category '" + category + "'");
  return it->second;
}

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> ids;
  for (const auto& [key, c] : connectomes) ids.insert(key.first);
  return {ids.begin(), ids.end()};
}

double fisher_z(double r) { return fisher_z(r, "value"); }

double fisher_z(double r, std::string_view cell) {
  if (!(std::abs(r) < 1.0)) {
    std::ostringstream os;
    os << "correlation " << r << " outside (-1, 1) at " << cell;
    throw DomainError(os.str());
  }
  return std::atanh(r);
}

Eigen::MatrixXd prepare_connectome(const Eigen::MatrixXd& raw, Scale scale, std::string_view origin) {
  if (raw.rows() != raw.cols()) {
    throw DataError(std::string(origin) + ": matrix is not square");
  }
  const auto V = raw.rows();
  Eigen::MatrixXd m(V, V);
  for (Eigen::Index r = 0; r < V; ++r) {
    for (Eigen::Index c = 0; c < V; ++c) {
      const double v = raw(r, c);
      if (r == c) {
        m(r, c) = 0.0;
        continue;
      }
      if (!std::isfinite(v)) throw DataError("non-finite value at " + cell_label(origin, r, c));
      m(r, c) = scale == Scale::Pearson ? fisher_z(v, cell_label(origin, r, c)) : v;
    }
  }
  for (Eigen::Index r = 0; r < V; ++r) {
    for (Eigen::Index c = r + 1; c < V; ++c) {
      const double gap = std::abs(m(r, c) - m(c, r));
      if (gap > kAsymmetryTolerance) {
        std::ostringstream os;
        os << "asymmetry " << gap << " exceeds " << kAsymmetryTolerance << " at "
           << cell_label(origin, r, c);
        throw DataError(os.str());
      }
      const double mean = 0.5 * (m(r, c) + m(c, r));
      m(r, c) = mean;
      m(c, r) = mean;
    }
  }
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, /*has_header=*/false);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw DataError(path.string() + ": empty matrix file");
  const auto cols = static_cast<Eigen::Index>(table.rows.front().size());
  Eigen::MatrixXd m(n, cols);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(row.size()) + " fields, expected " + std::to_string(cols));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& field = row[static_cast<std::size_t>(c)];
      if (field == "NaN" || field == "nan" || field == "NA" || field.empty()) {
        throw DataError("NaN cell at " + cell_label(path.string(), r, c));
      }
      m(r, c) = parse_double(field, cell_label(path.string(), r, c));
    }
  }
  return m;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  CsvWriter w(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::string line;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) line += ',';
      line += format_double(m(r, c));
    }
    w.row(line);
  }
  w.close();
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  auto require_file = [&](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw DataError("missing file: " + p.string());
    return p;
  };

  Dataset ds;
  try {
    ds.V = j.at("V").get<int>();
    const std::string scale_name = j.value("scale", std::string("fisher_z"));
    Scale scale;
    if (scale_name == "pearson") {
      scale = Scale::Pearson;
    } else if (scale_name == "fisher_z") {
      scale = Scale::FisherZ;
    } else {
      throw DataError("manifest scale must be 'pearson' or 'fisher_z', got '" + scale_name + "'");
    }

    ds.atlas = read_atlas(require_file(resolve(j.at("atlas").get<std::string>())));
    if (ds.atlas.node_count() != ds.V) {
      throw DataError("atlas has " + std::to_string(ds.atlas.node_count()) + " nodes but V = " +
                      std::to_string(ds.V));
    }

    for (const auto& b : j.at("behaviors")) {
      const auto category = b.at("category").get<std::string>();
      auto panel = read_behavior_panel(require_file(resolve(b.at("path").get<std::string>())), category);
      if (!ds.behaviors.emplace(category, std::move(panel)).second) {
        throw DataError("duplicate behavior category '" + category + "'");
      }
    }

    for (const auto& c : j.at("connectomes")) {
      Connectome con;
      con.subject_id = c.at("subject").get<std::string>();
      con.condition = c.at("condition").get<std::string>();
      const auto path = require_file(resolve(c.at("path").get<std::string>()));
      const Eigen::MatrixXd raw = read_matrix_csv(path);
      if (raw.rows() != ds.V || raw.cols() != ds.V) {
        throw DataError(path.string() + ": matrix is " + std::to_string(raw.rows()) + "x" +
                        std::to_string(raw.cols()) + " but V = " + std::to_string(ds.V));
      }
      con.matrix = prepare_connectome(raw, scale, path.string());
      if (std::find(ds.conditions.begin(), ds.conditions.end(), con.condition) == ds.conditions.end()) {
        ds.conditions.push_back(con.condition);
      }
      auto key = std::make_pair(con.subject_id, con.condition);
      if (!ds.connectomes.emplace(key, std::move(con)).second) {
        throw DataError("duplicate connectome for subject '" + key.first + "', condition '" +
                        key.second + "'");
      }
    }

    if (j.contains("average_from")) {
      add_average_condition(ds, j.at("average_from").get<std::vector<std::string>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  for (const auto& [category, panel] : ds.behaviors) {
    for (const auto& s : panel.subject_ids) {
      bool any = false;
      for (const auto& cond : ds.conditions) any = any || ds.has_connectome(s, cond);
      if (!any) {
        throw DataError("subject '" + s + "' in category '" + category + "' has no connectome");
      }
    }
  }
  return ds;
}

BehaviorPanel standardize_behaviors(const BehaviorPanel& panel) {
  BehaviorPanel out = panel;
  out.scaling.assign(static_cast<std::size_t>(panel.indicator_count()), {});
  for (int p = 0; p < panel.indicator_count(); ++p) {
    double sum = 0.0;
    int count = 0;
    std::optional<double> first;
    bool distinct = false;
    for (int i = 0; i < panel.subject_count(); ++i) {
      if (!panel.observed(i, p)) continue;
      const double v = panel.values(i, p);
      if (!first) first = v;
      else if (v != *first) distinct = true;
      sum += v;
      ++count;
    }
    if (!distinct) {
      throw DataError("indicator '" + panel.indicators[static_cast<std::size_t>(p)] + "' in category '" +
                      panel.category + "' has fewer than 2 distinct observed values");
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (int i = 0; i < panel.subject_count(); ++i) {
      if (panel.observed(i, p)) ss += (panel.values(i, p) - mean) * (panel.values(i, p) - mean);
    }
    const double sd = std::sqrt(ss / (count - 1));
    for (int i = 0; i < panel.subject_count(); ++i) {
      if (panel.observed(i, p)) out.values(i, p) = (panel.values(i, p) - mean) / sd;
    }
    out.scaling[static_cast<std::size_t>(p)] = {mean, sd};
  }
  return out;
}

std::map<std::string, Connectome> average_condition(const Dataset& dataset,
                                                    const std::vector<std::string>& sources) {
  if (sources.empty()) throw DataError("average_condition needs at least one source condition");
  std::map<std::string, Connectome> out;
  for (const auto& subject : dataset.subjects()) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dataset.V, dataset.V);
    for (const auto& cond : sources) {
      if (!dataset.has_connectome(subject, cond)) {
        throw DataError("subject '" + subject + "' is missing condition '" + cond +
                        "' required for the average");
      }
      acc += dataset.connectome(subject, cond).matrix;
    }
    acc /= static_cast<double>(sources.size());
    out.emplace(subject, Connectome{subject, std::string(kAverageCondition), std::move(acc)});
  }
  return out;
}

void add_average_condition(Dataset& dataset, const std::vector<std::string>& sources) {
  auto averaged = average_condition(dataset, sources);
  for (auto& [subject, con] : averaged) {
    dataset.connectomes[{subject, std::string(kAverageCondition)}] = std::move(con);
  }
  if (std::find(dataset.conditions.begin(), dataset.conditions.end(), kAverageCondition) ==
      dataset.conditions.end()) {
    dataset.conditions.emplace_back(kAverageCondition);
  }
}

}  // namespace cpredict::ingest
