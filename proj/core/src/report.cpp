#include "cpredict/report.hpp"

#include "cpredict/csv.hpp"
#include "cpredict/digest.hpp"

#include <fstream>
#include <stdexcept>

namespace cpredict::report {

namespace fs = std::filesystem;

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out.empty() ? "_" : out;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["artifact_version"] = artifact_version;
  j["command"] = command;
  j["config"] = config;
  j["inputs"] = nlohmann::json::array();
  for (const auto& [path, digest] : inputs) j["inputs"].push_back({{"path", path}, {"sha256", digest}});
  j["split_hashes"] = split_hashes;
  j["outputs"] = nlohmann::json::array();
  for (const auto& o : outputs) {
    nlohmann::json e{{"path", o.path}, {"kind", o.kind}, {"sha256", o.sha256}, {"bytes", o.bytes}};
    if (!o.condition.empty()) e["condition"] = o.condition;
    if (!o.category.empty()) e["category"] = o.category;
    j["outputs"].push_back(std::move(e));
  }
  j["warnings"] = warnings;
  j["warning_count"] = warnings.size();
  j["timings_seconds"] = timings;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.artifact_version = j.at("artifact_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config = j.value("config", nlohmann::json::object());
  for (const auto& e : j.at("inputs")) m.inputs.emplace_back(e.at("path"), e.at("sha256"));
  m.split_hashes = j.value("split_hashes", std::map<std::string, std::string>{});
  for (const auto& e : j.at("outputs")) {
    OutputFile o;
    o.path = e.at("path").get<std::string>();
    o.kind = e.at("kind").get<std::string>();
    o.sha256 = e.at("sha256").get<std::string>();
    o.bytes = e.at("bytes").get<std::uintmax_t>();
    o.condition = e.value("condition", "");
    o.category = e.value("category", "");
    m.outputs.push_back(std::move(o));
  }
  m.warnings = j.value("warnings", std::vector<std::string>{});
  m.timings = j.value("timings_seconds", std::map<std::string, double>{});
  return m;
}

std::vector<const OutputFile*> RunManifest::of_kind(const std::string& kind) const {
  std::vector<const OutputFile*> out;
  for (const auto& o : outputs) {
    if (o.kind == kind) out.push_back(&o);
  }
  return out;
}

namespace {

class Emitter {
 public:
  Emitter(fs::path root, RunManifest& manifest) : root_(std::move(root)), manifest_(manifest) {}

  template <typename WriteFn>
  void add(const std::string& rel, const std::string& kind, WriteFn&& write, const std::string& condition = {},
           const std::string& category = {}) {
    const fs::path path = root_ / rel;
    try {
      fs::create_directories(path.parent_path());
      write(path);
    } catch (const std::exception& e) {
      throw std::runtime_error("failed to write '" + path.string() + "': " + e.what());
    }
    OutputFile o;
    o.path = rel;
    o.kind = kind;
    o.condition = condition;
    o.category = category;
    o.sha256 = sha256_file(path);
    o.bytes = fs::file_size(path);
    manifest_.outputs.push_back(std::move(o));
  }

 private:
  fs::path root_;
  RunManifest& manifest_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed");
}

std::string cell_stem(const predict::CellKey& key) { return slug(key.first) + "__" + slug(key.second); }

}  // namespace

RunManifest emit_run(const RunContents& c, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create run directory '" + out_dir.string() + "': " + ec.message());

  RunManifest m;
  m.command = c.command;
  m.config = c.config;
  for (const auto& in : c.inputs) m.inputs.emplace_back(in.generic_string(), sha256_file(in));
  m.split_hashes = c.split_hashes;
  m.warnings = c.warnings;
  m.timings = c.timings;

  Emitter emit(out_dir, m);

  if (!c.accuracy.empty()) {
    std::map<predict::CellKey, std::vector<AccuracyRecord>> cells;
    for (const auto& a : c.accuracy) cells[{a.condition, a.category}].push_back(a);
    for (const auto& [key, rows] : cells) {
      const auto stem = "accuracy/" + cell_stem(key);
      emit.add(stem + ".csv", "accuracy", [&](const fs::path& p) { write_accuracy_csv(rows, p); }, key.first,
               key.second);
      emit.add(stem + "_mean.csv", "accuracy_mean",
               [&](const fs::path& p) { write_accuracy_mean_csv(predict::mean_over_repeats(rows), p); }, key.first,
               key.second);
    }
  }
  if (!c.predictions.empty()) {
    emit.add("predictions.csv", "predictions", [&](const fs::path& p) { write_predictions_csv(c.predictions, p); });
  }
  if (!c.construct.empty()) {
    emit.add("construct_predictions.csv", "construct_predictions",
             [&](const fs::path& p) { predict::write_construct_csv(c.construct, p); });
  }
  for (const auto& [key, summary] : c.summaries) {
    emit.add("summaries/" + cell_stem(key) + ".csv", "summary",
             [&](const fs::path& p) { model::write_summary_csv(summary, p); }, key.first, key.second);
  }
  for (const auto& [key, chains] : c.traces) {
    emit.add("traces/" + cell_stem(key) + ".csv", "trace",
             [&](const fs::path& p) { model::write_trace_csv(chains, p); }, key.first, key.second);
  }
  if (c.atlas) {
    emit.add("atlas.csv", "atlas", [&](const fs::path& p) { ingest::write_atlas(*c.atlas, p); });
  }
  if (!c.biomarkers.empty()) {
    if (!c.atlas) throw std::invalid_argument("emit_run: biomarkers need an atlas");
    emit.add("biomarkers.csv", "biomarkers",
             [&](const fs::path& p) { analysis::write_biomarkers_csv(c.biomarkers, *c.atlas, p); });
  }
  if (!c.spider.empty()) {
    emit.add("spider.csv", "spider", [&](const fs::path& p) { analysis::write_spider_csv(c.spider, p); });
  }
  if (!c.rest_task.empty()) {
    emit.add("rest_task.csv", "rest_task", [&](const fs::path& p) { analysis::write_spider_csv(c.rest_task, p); });
  }
  for (const auto& r : c.regressions) {
    emit.add("regressions/" + slug(r.name) + ".json", "regression_json",
             [&](const fs::path& p) { write_text(p, analysis::to_json(r.result).dump(2) + "\n"); });
    emit.add("regressions/" + slug(r.name) + ".txt", "regression_text",
             [&](const fs::path& p) { write_text(p, analysis::render_text(r.result, r.title)); });
  }
  for (const auto& d : c.diagnostics) {
    emit.add("diagnostics/" + cell_stem({d.condition, d.category}) + ".csv", "diagnostics",
             [&](const fs::path& p) {
               CsvWriter w(p);
               w.header({"node_id", "rhat", "ess"});
               for (const auto& n : d.nodes) w.row(n.node_id, n.rhat, n.ess);
               w.close();
             },
             d.condition, d.category);
  }

  try {
    write_text(out_dir / kManifestName, m.to_json().dump(2) + "\n");
  } catch (const std::exception& e) {
    throw std::runtime_error("failed to write '" + (out_dir / kManifestName).string() + "': " + e.what());
  }
  return m;
}

RunManifest read_manifest(const fs::path& run_dir) {
  const auto path = run_dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("no run manifest at '" + path.string() + "'");
  try {
    return RunManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed run manifest '" + path.string() + "': " + e.what());
  }
}

VerifyResult verify_run(const fs::path& run_dir) {
  VerifyResult out;
  const auto m = read_manifest(run_dir);
  for (const auto& o : m.outputs) {
    const auto path = run_dir / o.path;
    if (!fs::exists(path)) {
      out.problems.push_back("missing: " + o.path);
      continue;
    }
    if (fs::file_size(path) != o.bytes) out.problems.push_back("size mismatch: " + o.path);
    if (sha256_file(path) != o.sha256) out.problems.push_back("digest mismatch: " + o.path);
  }
  out.ok = out.problems.empty();
  return out;
}

}  // namespace cpredict::report
