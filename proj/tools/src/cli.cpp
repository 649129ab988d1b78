#include "cpredict/cli.hpp"

#include "cpredict/analysis.hpp"
#include "cpredict/csv.hpp"
#include "cpredict/ingest.hpp"
#include "cpredict/model.hpp"
#include "cpredict/parallel.hpp"
#include "cpredict/predict.hpp"
#include "cpredict/report.hpp"
#include "cpredict/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

namespace cpredict::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t resolve_seed(const CliConfig& cfg) {
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("CP_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used, 10);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("CP_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

model::SamplerConfig sampler_config(const CliConfig& cfg) {
  model::SamplerConfig s;
  s.burn_in = cfg.burn_in;
  s.samples = cfg.samples;
  s.thin = cfg.thin;
  s.chains = cfg.chains;
  s.inits = cfg.inits;
  s.seed = resolve_seed(cfg);
  s.validate();
  return s;
}

unsigned thread_count(const CliConfig& cfg) { return cfg.threads ? cfg.threads : default_threads(); }

nlohmann::json sampler_json(const model::SamplerConfig& s) {
  return {{"burn_in", s.burn_in},
          {"samples", s.samples},
          {"thin", s.thin},
          {"chains", s.chains},
          {"inits", s.inits},
          {"seed", s.seed},
          {"priors",
           {{"intercept_var", s.priors.intercept_var},
            {"latent_mean_var", s.priors.latent_mean_var},
            {"iw_df_offset", s.priors.iw_df_offset},
            {"iw_scale", s.priors.iw_scale},
            {"ig_shape", s.priors.ig_shape},
            {"ig_scale", s.priors.ig_scale},
            {"variance_floor", s.priors.variance_floor},
            {"jitter", s.priors.jitter}}}};
}

// Manifest plus every file it references, for input digests.
std::vector<fs::path> dataset_inputs(const fs::path& manifest) {
  std::vector<fs::path> files{manifest};
  std::ifstream in(manifest);
  const auto j = nlohmann::json::parse(in);
  const auto base = manifest.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  files.push_back(resolve(j.at("atlas").get<std::string>()));
  for (const auto& b : j.at("behaviors")) files.push_back(resolve(b.at("path").get<std::string>()));
  for (const auto& c : j.at("connectomes")) files.push_back(resolve(c.at("path").get<std::string>()));
  return files;
}

std::vector<std::string> pick(const std::vector<std::string>& filter, const std::vector<std::string>& available,
                              const char* what) {
  if (filter.empty()) return available;
  for (const auto& f : filter) {
    if (std::find(available.begin(), available.end(), f) == available.end()) {
      throw std::invalid_argument(std::string("unknown ") + what + " '" + f + "'");
    }
  }
  return filter;
}

std::vector<std::string> categories_of(const ingest::Dataset& ds) {
  std::vector<std::string> out;
  for (const auto& [name, panel] : ds.behaviors) out.push_back(name);
  return out;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

// ------------------------------------------------------------------ simulate

struct SimulateFlags {
  int V = 30;
  int subjects = 80;
  int P = 4;
  double sigma2_c = 0.25;
  double sigma2_b = 0.5;
  std::vector<double> cross{0.4, -0.4, 0.3, -0.3, 0.2, -0.2};
  double node_var = 1.0;
  double kappa_var = 1.0;
  double mean_level = 1.0;
  double d_sd = 0.1;
  std::vector<std::string> conditions{"Rest1"};
  std::string category = "Construct";
  bool cross_given = false;
};

int cmd_simulate(const CliConfig& cfg, const SimulateFlags& f, std::ostream& out) {
  const auto seed = resolve_seed(cfg);
  auto cross = f.cross;
  if (static_cast<int>(cross.size()) > f.V) {
    if (f.cross_given) throw std::invalid_argument("more cross-covariances than nodes");
    cross.resize(static_cast<std::size_t>(f.V));
  }
  const auto sigma = model::make_latent_covariance(f.V, cross, f.node_var, f.kappa_var);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("latent covariance is not positive definite; reduce --cross or raise --node-var/--kappa-var");
  }
  auto params = model::make_gen_params(f.V, f.subjects, f.P, sigma, f.sigma2_c, f.sigma2_b, f.mean_level, f.d_sd,
                                       derive_seed(seed, {1}));
  params.conditions = f.conditions;
  params.category = f.category;
  const auto sim = model::simulate(params, derive_seed(seed, {2}));
  const fs::path dir = cfg.out_dir.empty() ? fs::path("synthetic") : fs::path(cfg.out_dir);
  model::write_simulation(sim, params, dir);
  out << "wrote synthetic dataset to " << dir.string() << " (manifest.json)\n";
  return 0;
}

// ----------------------------------------------------------------------- fit

int cmd_fit(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto sampler = sampler_config(cfg);
  const auto dataset = ingest::load_dataset(cfg.manifest);
  const auto conditions = pick(cfg.conditions, dataset.conditions, "condition");
  const auto categories = pick(cfg.categories, categories_of(dataset), "category");

  report::RunContents run;
  run.command = "fit";
  run.inputs = dataset_inputs(cfg.manifest);
  run.atlas = dataset.atlas;
  run.config = {{"manifest", cfg.manifest},
                {"conditions", conditions},
                {"categories", categories},
                {"sampler", sampler_json(sampler)},
                {"threads", thread_count(cfg)}};
  const auto t_fit = Clock::now();
  for (const auto& c : conditions) {
    for (const auto& cat : categories) {
      auto res = predict::fit_full(dataset, c, cat, sampler, thread_count(cfg));
      for (const auto& chain : res.chains) {
        if (chain.used_fallback) run.warnings.push_back("initialization fallback used for " + c + "/" + cat);
      }
      run.summaries[{c, cat}] = std::move(res.summary);
      run.traces[{c, cat}] = std::move(res.chains);
    }
  }
  run.timings["fit"] = seconds_since(t_fit);
  run.timings["total"] = seconds_since(t0);
  const fs::path dir = cfg.out_dir.empty() ? fs::path("run_fit") : fs::path(cfg.out_dir);
  const auto manifest = report::emit_run(run, dir);
  print_warnings(run.warnings, err);
  out << "fit: " << manifest.outputs.size() << " file(s) written to " << dir.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------------ cv

int cmd_cv(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto dataset = ingest::load_dataset(cfg.manifest);

  predict::CvConfig cv;
  cv.sampler = sampler_config(cfg);
  cv.conditions = pick(cfg.conditions, dataset.conditions, "condition");
  cv.categories = pick(cfg.categories, categories_of(dataset), "category");
  cv.methods = cfg.methods;
  cv.train_fraction = cfg.train_fraction;
  cv.repeats = cfg.repeats;
  cv.partitioned = cfg.partitioned;
  cv.select_by = predict::parse_select_by(cfg.select_by);
  cv.threads = thread_count(cfg);

  const auto t_cv = Clock::now();
  auto res = predict::cross_validate(dataset, cv);

  report::RunContents run;
  run.command = "cv";
  run.inputs = dataset_inputs(cfg.manifest);
  run.atlas = dataset.atlas;
  run.config = {{"manifest", cfg.manifest},
                {"conditions", cv.conditions},
                {"categories", cv.categories},
                {"methods", cv.methods},
                {"train_fraction", cv.train_fraction},
                {"repeats", cv.repeats},
                {"partitioned", cv.partitioned},
                {"select_by", predict::to_string(cv.select_by)},
                {"cpm_p_threshold", cv.baseline.p_threshold},
                {"ridge_lambda_grid", cv.baseline.lambda_grid},
                {"ridge_inner_folds", cv.baseline.inner_folds},
                {"sampler", sampler_json(cv.sampler)},
                {"threads", cv.threads}};
  if (cv.select_by == predict::SelectBy::TestFit) {
    run.warnings.push_back("restarts selected by test-sample fit; test outcomes influence the reported predictions");
  }
  for (const auto& [cat, plan] : res.plans) run.split_hashes[cat] = plan.hash();
  run.predictions = std::move(res.predictions);
  run.construct = std::move(res.construct);
  run.accuracy = res.accuracy.records;
  run.summaries = std::move(res.summaries);
  run.traces = std::move(res.traces);
  run.warnings.insert(run.warnings.end(), res.flags.begin(), res.flags.end());
  run.timings["cv"] = seconds_since(t_cv);
  run.timings["total"] = seconds_since(t0);

  const fs::path dir = cfg.out_dir.empty() ? fs::path("run_cv") : fs::path(cfg.out_dir);
  const auto manifest = report::emit_run(run, dir);
  print_warnings(run.warnings, err);
  for (const auto& m : res.accuracy.means) {
    out << m.method << ' ' << m.condition << ' ' << m.category << ' ' << m.indicator << " mean r = " << m.mean_r
        << '\n';
  }
  out << "cv: " << manifest.outputs.size() << " file(s) written to " << dir.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------- analyze

struct AnalyzeFlags {
  std::string run_dir;
  int k = 10;
  double rhat_threshold = 1.1;
};

int cmd_analyze(const CliConfig& cfg, const AnalyzeFlags& f, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const fs::path run_dir(f.run_dir);
  const auto upstream = report::read_manifest(run_dir);
  if (upstream.command != "cv" && upstream.command != "fit") {
    throw std::invalid_argument("analyze needs a cv or fit run, got '" + upstream.command + "'");
  }
  const auto atlas_files = upstream.of_kind("atlas");
  if (atlas_files.empty()) throw std::runtime_error("upstream run has no atlas.csv");
  const auto atlas = ingest::read_atlas(run_dir / atlas_files.front()->path);
  const auto summaries = upstream.of_kind("summary");
  if (summaries.empty()) throw std::runtime_error("upstream run has no posterior summaries");

  report::RunContents run;
  run.command = "analyze";
  run.atlas = atlas;
  run.config = {{"run", f.run_dir}, {"k", f.k}, {"rhat_threshold", f.rhat_threshold}};
  for (const auto& o : upstream.outputs) run.inputs.push_back(run_dir / o.path);

  std::map<std::string, std::map<std::string, analysis::NetworkCounts>> counts;  // category -> condition
  for (const auto* s : summaries) {
    const auto summary = model::read_summary_csv(run_dir / s->path);
    auto bio = analysis::top_biomarkers(summary, f.k, s->condition, s->category);
    const auto c = analysis::network_counts(bio, atlas);
    for (std::size_t i = 0; i < c.size(); ++i) {
      run.spider.push_back({s->condition, s->category, ingest::kAllNetworks[i], c[i]});
    }
    counts[s->category][s->condition] = c;
    for (bool absolute : {true, false}) {
      const std::string tag = absolute ? "abs" : "signed";
      try {
        run.regressions.push_back(
            {"label__" + report::slug(s->condition) + "__" + report::slug(s->category) + "__" + tag,
             "Network effects on " + std::string(absolute ? "absolute " : "") +
                 "covariance estimates: " + s->condition + " / " + s->category,
             analysis::label_effect_regression(bio.values, atlas, absolute)});
      } catch (const analysis::AnalysisError& e) {
        run.warnings.push_back("label regression (" + tag + ") skipped for " + s->condition + "/" + s->category +
                               ": " + e.what());
      }
    }
    run.biomarkers.push_back(std::move(bio));
  }

  for (const auto& [cat, by_condition] : counts) {
    try {
      const auto avg = analysis::rest_task_average(by_condition);
      for (std::size_t i = 0; i < avg.rest.size(); ++i) {
        run.rest_task.push_back({"rest", cat, ingest::kAllNetworks[i], avg.rest[i]});
        run.rest_task.push_back({"task", cat, ingest::kAllNetworks[i], avg.task[i]});
      }
    } catch (const analysis::AnalysisError& e) {
      run.warnings.push_back("rest/task average skipped for " + cat + ": " + e.what());
    }
  }

  std::map<std::pair<std::string, std::string>, std::vector<AccuracyRecord>> by_method;
  for (const auto* a : upstream.of_kind("accuracy")) {
    for (auto& r : read_accuracy_csv(run_dir / a->path)) by_method[{r.method, r.category}].push_back(std::move(r));
  }
  for (const auto& [key, records] : by_method) {
    try {
      auto m = analysis::condition_effect_regression(records);
      run.regressions.push_back({"condition__" + report::slug(key.first) + "__" + report::slug(key.second),
                                 "Condition effects on prediction accuracy (reference Rest1): " + key.first + " / " +
                                     key.second,
                                 std::move(m.result)});
    } catch (const analysis::AnalysisError& e) {
      run.warnings.push_back("condition regression skipped for " + key.first + "/" + key.second + ": " + e.what());
    }
  }

  for (const auto* t : upstream.of_kind("trace")) {
    const auto trace = model::read_trace_csv(run_dir / t->path);
    report::Diagnostics d{t->condition, t->category, analysis::diagnose(trace)};
    if (trace.chain_ids.size() < 2) {
      out << "note: R-hat needs at least 2 chains; " << t->condition << '/' << t->category << " has "
          << trace.chain_ids.size() << '\n';
    } else {
      int bad = 0;
      for (const auto& n : d.nodes) bad += !(n.rhat < f.rhat_threshold);
      if (bad > 0) {
        run.warnings.push_back(std::to_string(bad) + " node(s) with R-hat >= " + format_double(f.rhat_threshold) +
                               " in " + t->condition + "/" + t->category);
      }
    }
    run.diagnostics.push_back(std::move(d));
  }

  run.timings["total"] = seconds_since(t0);
  const fs::path dir = cfg.out_dir.empty() ? run_dir / "analysis" : fs::path(cfg.out_dir);
  const auto manifest = report::emit_run(run, dir);
  print_warnings(run.warnings, err);
  out << "analyze: " << manifest.outputs.size() << " file(s) written to " << dir.string() << " with "
      << run.warnings.size() << " warning(s)\n";
  return 0;
}

void add_data_flags(CLI::App& sub, CliConfig& cfg) {
  sub.add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  sub.add_option("--conditions", cfg.conditions, "Conditions to use (default: all)")->delimiter(',');
  sub.add_option("--categories", cfg.categories, "Behavior categories to use (default: all)")->delimiter(',');
}

void add_sampler_flags(CLI::App& sub, CliConfig& cfg) {
  sub.add_option("--burn-in", cfg.burn_in, "Burn-in sweeps per chain")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub.add_option("--samples", cfg.samples, "Retained draws per chain")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--thin", cfg.thin, "Sweeps between retained draws")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--chains", cfg.chains, "Chains per restart")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--inits", cfg.inits, "Restarts (best one is kept)")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--threads", cfg.threads, "Worker threads (default: available parallelism)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint latent-space connectome/behavior modeling and prediction", "connectome-predict"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(report::kArtifactVersion));
  CliConfig cfg;
  SimulateFlags sim;
  AnalyzeFlags ana;

  app.add_option("--seed", cfg.seed, "Master seed (overrides CP_SEED; default 0)");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset with known ground truth");
  simulate->add_option("--V", sim.V, "Nodes")->capture_default_str()->check(CLI::Range(2, 100000));
  simulate->add_option("--subjects", sim.subjects, "Subjects")->capture_default_str()->check(CLI::Range(2, 10000000));
  simulate->add_option("--P", sim.P, "Indicators")->capture_default_str()->check(CLI::Range(1, 100000));
  simulate->add_option("--sigma2-c", sim.sigma2_c, "Connectome noise variance")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--sigma2-b", sim.sigma2_b, "Indicator noise variance")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--cross", sim.cross, "Node-construct covariances for nodes 1..k")->delimiter(',')->capture_default_str();
  simulate->add_option("--node-var", sim.node_var, "Node latent variance")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--kappa-var", sim.kappa_var, "Construct variance")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--mean-level", sim.mean_level, "Latent mean of every node")->capture_default_str();
  simulate->add_option("--d-sd", sim.d_sd, "SD of the intercept matrix entries")->capture_default_str()->check(CLI::NonNegativeNumber);
  simulate->add_option("--conditions", sim.conditions, "Condition labels")->delimiter(',')->capture_default_str();
  simulate->add_option("--category", sim.category, "Behavior category label")->capture_default_str();
  simulate->add_option("--out", cfg.out_dir, "Output directory (default: synthetic)");
  simulate->add_option("--seed", cfg.seed, "Seed (overrides CP_SEED)");

  auto* fit = app.add_subcommand("fit", "Fit the model to all subjects; write posterior summaries and traces");
  add_data_flags(*fit, cfg);
  add_sampler_flags(*fit, cfg);
  fit->add_option("--seed", cfg.seed, "Seed (overrides CP_SEED)");
  fit->add_option("--out", cfg.out_dir, "Run directory (default: run_fit)");

  auto* cv = app.add_subcommand("cv", "Cross-validated prediction with the model and baselines");
  add_data_flags(*cv, cfg);
  add_sampler_flags(*cv, cfg);
  cv->add_option("--seed", cfg.seed, "Seed (overrides CP_SEED)");
  cv->add_option("--train-fraction", cfg.train_fraction, "Training share per repeat, in (0.5, 0.95)")->capture_default_str();
  cv->add_option("--repeats", cfg.repeats, "Train/test repeats")->capture_default_str()->check(CLI::PositiveNumber);
  cv->add_flag("--partitioned", cfg.partitioned, "Disjoint test blocks (K-fold with K = repeats)");
  cv->add_option("--methods", cfg.methods, "Subset of latentsna,cpm,ridge")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::IsMember({"latentsna", "cpm", "ridge"}));
  cv->add_option("--select-by", cfg.select_by, "Restart selection: train-fit or test-fit")
      ->capture_default_str()
      ->check(CLI::IsMember({"train-fit", "test-fit"}));
  cv->add_option("--out", cfg.out_dir, "Run directory (default: run_cv)");

  auto* analyze = app.add_subcommand("analyze", "Biomarkers, network counts, regressions and diagnostics of a run");
  analyze->add_option("--run", ana.run_dir, "Directory of a cv or fit run")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--k", ana.k, "Biomarkers per sign")->capture_default_str()->check(CLI::NonNegativeNumber);
  analyze->add_option("--rhat-threshold", ana.rhat_threshold, "Warn when split R-hat reaches this value")->capture_default_str();
  analyze->add_option("--out", cfg.out_dir, "Output directory (default: <run>/analysis)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*simulate) {
      sim.cross_given = simulate->count("--cross") > 0;
      return cmd_simulate(cfg, sim, out);
    }
    if (*fit) return cmd_fit(cfg, out, err);
    if (*cv) return cmd_cv(cfg, out, err);
    if (*analyze) return cmd_analyze(cfg, ana, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace cpredict::cli
