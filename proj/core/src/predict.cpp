#include "cpredict/predict.hpp"

#include "cpredict/csv.hpp"
#include "cpredict/digest.hpp"
#include "cpredict/parallel.hpp"
#include "cpredict/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace cpredict::predict {

std::string SplitPlan::hash() const {
  std::ostringstream text;
  for (std::size_t r = 0; r < repeats.size(); ++r) {
    text << "repeat " << r << "\ntrain";
    for (int i : repeats[r].train) text << ' ' << i;
    text << "\ntest";
    for (int i : repeats[r].test) text << ' ' << i;
    text << '\n';
  }
  return sha256_hex(text.str());
}

SplitPlan split_folds(int n, double train_fraction, int repeats, std::uint64_t seed, bool partitioned) {
  if (n < 10) throw std::invalid_argument("split_folds: need at least 10 subjects, got " + std::to_string(n));
  if (!(train_fraction > 0.5 && train_fraction < 0.95)) {
    throw std::invalid_argument("split_folds: train_fraction must lie in (0.5, 0.95), got " +
                                format_double(train_fraction));
  }
  if (repeats < 1) throw std::invalid_argument("split_folds: repeats must be >= 1");
  if (partitioned && repeats > n) throw std::invalid_argument("split_folds: more folds than subjects");

  SplitPlan plan;
  plan.train_fraction = train_fraction;
  plan.seed = seed;
  plan.partitioned = partitioned;
  const int n_train = static_cast<int>(std::lround(train_fraction * n));

  std::vector<int> order(static_cast<std::size_t>(n));
  Random rng(derive_seed(seed, {0x5b11}));
  if (partitioned) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
  }
  for (int r = 0; r < repeats; ++r) {
    Split s;
    std::vector<bool> in_test(static_cast<std::size_t>(n), false);
    if (partitioned) {
      const int lo = static_cast<int>(static_cast<long>(r) * n / repeats);
      const int hi = static_cast<int>(static_cast<long>(r + 1) * n / repeats);
      for (int k = lo; k < hi; ++k) in_test[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
    } else {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng.engine());
      for (int k = n_train; k < n; ++k) in_test[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
    }
    for (int i = 0; i < n; ++i) (in_test[static_cast<std::size_t>(i)] ? s.test : s.train).push_back(i);
    plan.repeats.push_back(std::move(s));
  }
  return plan;
}

std::string to_string(SelectBy s) { return s == SelectBy::TrainFit ? "train-fit" : "test-fit"; }

SelectBy parse_select_by(const std::string& text) {
  if (text == "train-fit") return SelectBy::TrainFit;
  if (text == "test-fit") return SelectBy::TestFit;
  throw std::invalid_argument("select-by must be 'train-fit' or 'test-fit', got '" + text + "'");
}

namespace {

void check_split(const Split& split, int n) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto* part : {&split.train, &split.test}) {
    for (int i : *part) {
      if (i < 0 || i >= n) throw std::invalid_argument("split row " + std::to_string(i) + " out of range");
      if (seen[static_cast<std::size_t>(i)]++) {
        throw std::invalid_argument("split row " + std::to_string(i) + " appears in both train and test");
      }
    }
  }
  if (split.test.empty()) throw std::invalid_argument("split has no test rows");
}

std::uint64_t cell_stream(int repeat, const std::string& condition, const std::string& category) {
  return fnv1a64(std::to_string(repeat) + '\x1f' + condition + '\x1f' + category);
}

// Posterior mean of e_p + kappa_j (standardized) for tracked subject t.
Eigen::MatrixXd standardized_predictions(const std::vector<model::PosteriorDraws>& chains, int n_test, int P) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n_test, P);
  std::size_t count = 0;
  for (const auto& c : chains) {
    for (const auto& d : c.draws) {
      for (int t = 0; t < n_test; ++t) sum.row(t) += (d.e.array() + d.kappa(t)).matrix().transpose();
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("no retained draws to predict from");
  return sum / static_cast<double>(count);
}

}  // namespace

FitResult fit_predict(const ingest::Dataset& dataset, const std::string& condition, const std::string& category,
                      const Split& split, const model::SamplerConfig& config, const FitOptions& options) {
  config.validate();
  const auto& panel = dataset.behavior(category);
  check_split(split, panel.subject_count());
  for (int row : split.test) {
    const auto& id = panel.subject_ids[static_cast<std::size_t>(row)];
    if (!dataset.has_connectome(id, condition)) {
      throw ingest::DataError("test subject '" + id + "' has no connectome for condition '" + condition + "'");
    }
  }

  const auto data = model::make_fit_data(dataset, condition, panel.masked(split.test));
  const int P = data.P();
  const int n_test = static_cast<int>(split.test.size());

  model::ChainOptions chain_opts;
  chain_opts.stream = cell_stream(options.repeat, condition, category);
  chain_opts.tracked_subjects = split.test;

  const int inits = config.inits;
  const int n_chains = config.chains;
  std::vector<model::PosteriorDraws> runs(static_cast<std::size_t>(inits * n_chains));
  parallel_for(runs.size(), options.threads, [&](std::size_t k) {
    auto opts = chain_opts;
    opts.restart = static_cast<int>(k) / n_chains;
    runs[k] = model::run_chain(data, config, static_cast<int>(k) % n_chains, opts);
  });

  FitResult out;
  for (int r = 0; r < inits; ++r) {
    const auto first = runs.begin() + r * n_chains;
    std::vector<model::PosteriorDraws> chains(std::make_move_iterator(first),
                                              std::make_move_iterator(first + n_chains));
    double score = 0.0;
    if (options.select_by == SelectBy::TrainFit) {
      for (const auto& c : chains) score += c.mean_log_joint();
      score /= n_chains;
    } else {
      // Test-sample fit on the training scale: reads the held-out values.
      const Eigen::MatrixXd pred = standardized_predictions(chains, n_test, P);
      double sse = 0.0;
      long cells = 0;
      for (int t = 0; t < n_test; ++t) {
        const int row = split.test[static_cast<std::size_t>(t)];
        for (int p = 0; p < P; ++p) {
          if (!panel.observed(row, p)) continue;
          const auto& sc = data.scaling[static_cast<std::size_t>(p)];
          const double z = (panel.values(row, p) - sc.mean) / sc.sd;
          sse += (pred(t, p) - z) * (pred(t, p) - z);
          ++cells;
        }
      }
      score = cells > 0 ? -sse / static_cast<double>(cells) : 0.0;
    }
    out.scores.push_back({r, score});
    if (r == 0 || score > out.scores[static_cast<std::size_t>(out.selected_restart)].score) {
      out.selected_restart = r;
      out.chains = std::move(chains);
    }
  }

  const Eigen::MatrixXd pred = standardized_predictions(out.chains, n_test, P);
  out.summary = model::posterior_summary(out.chains);
  for (int t = 0; t < n_test; ++t) {
    const int row = split.test[static_cast<std::size_t>(t)];
    const auto& id = panel.subject_ids[static_cast<std::size_t>(row)];
    for (int p = 0; p < P; ++p) {
      const auto& sc = data.scaling[static_cast<std::size_t>(p)];
      out.predictions.push_back({kMethodLatent, condition, category, panel.indicators[static_cast<std::size_t>(p)],
                                 options.repeat, id, sc.mean + sc.sd * pred(t, p),
                                 panel.observed(row, p) ? panel.values(row, p)
                                                        : std::numeric_limits<double>::quiet_NaN()});
    }
    double kappa = 0.0;
    std::size_t count = 0;
    for (const auto& c : out.chains) {
      for (const auto& d : c.draws) {
        kappa += d.kappa(t);
        ++count;
      }
    }
    out.construct.push_back({condition, category, options.repeat, id, kappa / static_cast<double>(count)});
  }
  if (!options.keep_draws) {
    for (auto& c : out.chains) c.draws.clear();
  }
  return out;
}

FitResult fit_full(const ingest::Dataset& dataset, const std::string& condition, const std::string& category,
                   const model::SamplerConfig& config, unsigned threads) {
  config.validate();
  const auto data = model::make_fit_data(dataset, condition, category);
  const int n_chains = config.chains;
  std::vector<model::PosteriorDraws> runs(static_cast<std::size_t>(config.inits * n_chains));
  parallel_for(runs.size(), threads, [&](std::size_t k) {
    model::ChainOptions opts;
    opts.stream = cell_stream(-1, condition, category);
    opts.restart = static_cast<int>(k) / n_chains;
    runs[k] = model::run_chain(data, config, static_cast<int>(k) % n_chains, opts);
  });
  FitResult out;
  for (int r = 0; r < config.inits; ++r) {
    double score = 0.0;
    for (int c = 0; c < n_chains; ++c) score += runs[static_cast<std::size_t>(r * n_chains + c)].mean_log_joint();
    score /= n_chains;
    out.scores.push_back({r, score});
    if (r == 0 || score > out.scores[static_cast<std::size_t>(out.selected_restart)].score) out.selected_restart = r;
  }
  const auto first = runs.begin() + out.selected_restart * n_chains;
  out.chains.assign(std::make_move_iterator(first), std::make_move_iterator(first + n_chains));
  out.summary = model::posterior_summary(out.chains);
  return out;
}

namespace {

using CellId = std::tuple<std::string, std::string, std::string, std::string, int>;

std::string describe(const CellId& c) {
  return std::get<0>(c) + "/" + std::get<1>(c) + "/" + std::get<2>(c) + "/" + std::get<3>(c) + "/repeat " +
         std::to_string(std::get<4>(c));
}

}  // namespace

std::vector<AccuracyMean> mean_over_repeats(const std::vector<AccuracyRecord>& records) {
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> groups;
  for (const auto& a : records) groups[{a.method, a.condition, a.category, a.indicator}].push_back(a.r);
  std::vector<AccuracyMean> out;
  for (const auto& [key, rs] : groups) {
    AccuracyMean m;
    std::tie(m.method, m.condition, m.category, m.indicator) = key;
    m.mean_r = stats::mean(rs);
    m.sd_r = rs.size() > 1 ? std::sqrt(stats::variance(rs)) : 0.0;
    m.repeats = static_cast<int>(rs.size());
    out.push_back(std::move(m));
  }
  return out;
}

AccuracyTable accuracy_table(const std::vector<Prediction>& predictions, const AccuracyGrid* grid) {
  std::map<CellId, std::pair<std::vector<double>, std::vector<double>>> cells;
  for (const auto& p : predictions) {
    auto& cell = cells[{p.method, p.condition, p.category, p.indicator, p.repeat}];
    if (std::isnan(p.observed)) continue;
    cell.first.push_back(p.predicted);
    cell.second.push_back(p.observed);
  }

  if (grid) {
    std::vector<std::string> missing;
    for (const auto& m : grid->methods) {
      for (const auto& c : grid->conditions) {
        for (const auto& [cat, indicators] : grid->indicators) {
          for (const auto& ind : indicators) {
            for (int r = 0; r < grid->repeats; ++r) {
              CellId id{m, c, cat, ind, r};
              if (!cells.count(id)) missing.push_back(describe(id));
            }
          }
        }
      }
    }
    if (!missing.empty()) {
      std::string msg = "accuracy table is missing " + std::to_string(missing.size()) + " cell(s):";
      for (const auto& m : missing) msg += "\n  " + m;
      throw ingest::DataError(msg);
    }
  }

  AccuracyTable out;
  for (const auto& [id, xy] : cells) {
    AccuracyRecord a;
    std::tie(a.method, a.condition, a.category, a.indicator, a.repeat) = id;
    a.n_test = static_cast<int>(xy.first.size());
    if (a.n_test < 3) {
      throw ingest::DataError("cell " + describe(id) + " has " + std::to_string(a.n_test) +
                              " observed test values; need at least 3");
    }
    try {
      a.r = pearson(xy.first, xy.second);
    } catch (const stats::UndefinedCorrelation&) {
      a.r = 0.0;
      out.notes.push_back("constant predictions or observations in " + describe(id) + "; r recorded as 0");
    }
    out.records.push_back(std::move(a));
  }
  out.means = mean_over_repeats(out.records);
  return out;
}

CvResult cross_validate(const ingest::Dataset& dataset, const CvConfig& config) {
  config.sampler.validate();
  if (config.methods.empty()) throw std::invalid_argument("no prediction methods selected");
  for (const auto& m : config.methods) {
    if (m != kMethodLatent && m != kMethodCpm && m != kMethodRidge) {
      throw std::invalid_argument("unknown method '" + m + "'");
    }
  }
  for (const auto& c : config.conditions) {
    if (std::find(dataset.conditions.begin(), dataset.conditions.end(), c) == dataset.conditions.end()) {
      throw ingest::DataError("unknown condition '" + c + "'");
    }
  }

  CvResult out;
  AccuracyGrid grid;
  grid.methods = config.methods;
  grid.conditions = config.conditions;
  grid.repeats = config.repeats;
  for (const auto& cat : config.categories) {
    const auto& panel = dataset.behavior(cat);
    out.plans[cat] = split_folds(panel.subject_count(), config.train_fraction, config.repeats, config.sampler.seed,
                                 config.partitioned);
    grid.indicators[cat] = panel.indicators;
  }

  struct Task {
    std::string method;
    std::string condition;
    std::string category;
    int repeat;
  };
  std::vector<Task> tasks;
  for (const auto& m : config.methods) {
    for (const auto& c : config.conditions) {
      for (const auto& cat : config.categories) {
        for (int r = 0; r < config.repeats; ++r) tasks.push_back({m, c, cat, r});
      }
    }
  }

  struct TaskResult {
    std::vector<Prediction> predictions;
    FitResult fit;
    std::vector<std::string> flags;
  };
  std::vector<TaskResult> results(tasks.size());
  const unsigned threads = std::max(1u, config.threads);
  const unsigned outer = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1)));
  const unsigned inner = std::max(1u, threads / outer);

  parallel_for(tasks.size(), outer, [&](std::size_t k) {
    const auto& t = tasks[k];
    const auto& split = out.plans.at(t.category).repeats[static_cast<std::size_t>(t.repeat)];
    auto& res = results[k];
    if (t.method == kMethodLatent) {
      FitOptions opts;
      opts.select_by = config.select_by;
      opts.repeat = t.repeat;
      opts.threads = inner;
      opts.keep_draws = t.repeat == 0;
      res.fit = fit_predict(dataset, t.condition, t.category, split, config.sampler, opts);
      res.predictions = res.fit.predictions;
    } else {
      auto opts = config.baseline;
      opts.seed = config.sampler.seed;
      res.predictions =
          baselines::baseline_predictions(t.method, dataset, t.condition, t.category, split, t.repeat, opts, &res.flags);
    }
  });

  std::map<CellKey, std::vector<model::PosteriorSummary>> per_repeat;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& t = tasks[k];
    auto& res = results[k];
    out.predictions.insert(out.predictions.end(), res.predictions.begin(), res.predictions.end());
    out.flags.insert(out.flags.end(), res.flags.begin(), res.flags.end());
    if (t.method != kMethodLatent) continue;
    const CellKey key{t.condition, t.category};
    out.construct.insert(out.construct.end(), res.fit.construct.begin(), res.fit.construct.end());
    per_repeat[key].push_back(res.fit.summary);
    out.scores[key].push_back(res.fit.scores);
    if (t.repeat == 0) out.traces[key] = std::move(res.fit.chains);
  }
  for (const auto& [key, sums] : per_repeat) out.summaries[key] = model::average_summaries(sums);
  out.accuracy = accuracy_table(out.predictions, &grid);
  out.flags.insert(out.flags.end(), out.accuracy.notes.begin(), out.accuracy.notes.end());
  return out;
}

void write_construct_csv(const std::vector<ConstructPrediction>& rows, const std::filesystem::path& path) {
  CsvWriter w(path);
  w.header({"condition", "category", "repeat", "subject_id", "kappa_mean"});
  for (const auto& c : rows) w.row(c.condition, c.category, c.repeat, c.subject_id, c.kappa_mean);
  w.close();
}

}  // namespace cpredict::predict
