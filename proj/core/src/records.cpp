#include "cpredict/records.hpp"

#include "cpredict/csv.hpp"

#include <cmath>
#include <limits>

namespace cpredict {

void write_predictions_csv(const std::vector<Prediction>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"method", "condition", "category", "indicator", "repeat", "subject_id", "predicted", "observed"});
  for (const auto& p : rows) {
    const std::string observed = std::isnan(p.observed) ? std::string{} : format_double(p.observed);
    w.row(p.method, p.condition, p.category, p.indicator, p.repeat, p.subject_id, p.predicted, observed);
  }
  w.close();
}

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto m = t.column("method"), c = t.column("condition"), g = t.column("category"), i = t.column("indicator"),
             r = t.column("repeat"), s = t.column("subject_id"), p = t.column("predicted"), o = t.column("observed");
  std::vector<Prediction> out;
  const std::string ctx = path.string();
  for (const auto& row : t.rows) {
    Prediction pr;
    pr.method = row[m];
    pr.condition = row[c];
    pr.category = row[g];
    pr.indicator = row[i];
    pr.repeat = static_cast<int>(parse_int(row[r], ctx));
    pr.subject_id = row[s];
    pr.predicted = parse_double(row[p], ctx);
    pr.observed = (o < row.size() && !row[o].empty()) ? parse_double(row[o], ctx)
                                                      : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(pr));
  }
  return out;
}

void write_accuracy_csv(const std::vector<AccuracyRecord>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"method", "condition", "category", "indicator", "repeat", "r", "n_test"});
  for (const auto& a : rows) w.row(a.method, a.condition, a.category, a.indicator, a.repeat, a.r, a.n_test);
  w.close();
}

std::vector<AccuracyRecord> read_accuracy_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto m = t.column("method"), c = t.column("condition"), g = t.column("category"), i = t.column("indicator"),
             rep = t.column("repeat"), r = t.column("r"), n = t.column("n_test");
  std::vector<AccuracyRecord> out;
  const std::string ctx = path.string();
  for (const auto& row : t.rows) {
    out.push_back({row[m], row[c], row[g], row[i], static_cast<int>(parse_int(row[rep], ctx)),
                   parse_double(row[r], ctx), static_cast<int>(parse_int(row[n], ctx))});
  }
  return out;
}

void write_accuracy_mean_csv(const std::vector<AccuracyMean>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"method", "condition", "category", "indicator", "mean_r", "sd_r", "repeats"});
  for (const auto& a : rows) w.row(a.method, a.condition, a.category, a.indicator, a.mean_r, a.sd_r, a.repeats);
  w.close();
}

}  // namespace cpredict
