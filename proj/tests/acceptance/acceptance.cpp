// Acceptance suite: one [PASS]/[FAIL] line per criterion; exit status 1 if
// any criterion fails.

#include "conditional_check.hpp"
#include "fixtures.hpp"
#include "ols_oracle.hpp"
#include "oracle.hpp"

#include "cpredict/analysis.hpp"
#include "cpredict/digest.hpp"
#include "cpredict/model.hpp"
#include "cpredict/parallel.hpp"
#include "cpredict/predict.hpp"
#include "cpredict/report.hpp"
#include "cpredict/simulate.hpp"
#include "cpredict/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace cpredict;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const std::vector<double> kRecoveryCross{0.4, -0.4, 0.3, -0.3, 0.2, -0.2};
constexpr int kV = 30, kN = 80, kP = 4;

model::Simulation recovery_sim(const std::vector<double>& cross, int n = kN, double sigma2_b = 0.5,
                               std::uint64_t seed = 11) {
  const auto sigma = model::make_latent_covariance(kV, cross);
  const auto params = model::make_gen_params(kV, n, kP, sigma, 0.25, sigma2_b, 1.0, 0.1, seed);
  return model::simulate(params, seed + 1);
}

model::SamplerConfig recovery_sampler() {
  model::SamplerConfig c;
  c.burn_in = 1000;
  c.samples = 2000;
  c.seed = 5;
  return c;
}

std::vector<model::PosteriorDraws> run_chains(const model::FitData& data, int chains) {
  std::vector<model::PosteriorDraws> out(static_cast<std::size_t>(chains));
  parallel_for(out.size(), default_threads(),
               [&](std::size_t c) { out[c] = model::run_chain(data, recovery_sampler(), static_cast<int>(c)); });
  return out;
}

// In-sample covariance between each true node latent and the true construct.
Eigen::VectorXd realized_cross(const model::GroundTruth& truth) {
  const Eigen::MatrixXd yc = truth.Y.rowwise() - truth.Y.colwise().mean();
  const Eigen::VectorXd kc = truth.kappa.array() - truth.kappa.mean();
  return yc.transpose() * kc / static_cast<double>(truth.Y.rows() - 1);
}

Outcome parameter_recovery() {
  const auto sim = recovery_sim(kRecoveryCross);
  const auto data = model::make_fit_data(sim.dataset, "Rest1", "Construct");
  const auto t0 = Clock::now();
  const auto chains = run_chains(data, 2);
  const double secs = seconds_since(t0);
  const Eigen::VectorXd est = model::posterior_summary(chains).means();
  const Eigen::VectorXd truth = sim.truth.cross_covariance();
  const Eigen::VectorXd realized = realized_cross(sim.truth);
  const double rho = stats::spearman(stats::as_span(est), stats::as_span(realized));
  const double rho_sigma = stats::spearman(stats::as_span(est), stats::as_span(truth));
  int signs = 0;
  for (int v = 0; v < static_cast<int>(kRecoveryCross.size()); ++v) signs += (est(v) > 0) == (truth(v) > 0);
  return {rho >= 0.8 && signs == 6 && secs < 600.0,
          fmt("spearman vs realized covariances %.3f (>= 0.8; vs Sigma cross block %.3f), signal signs %d/6, "
              "fit time %.1fs (< 600s)",
              rho, rho_sigma, signs, secs)};
}

double mean_abs_r(const std::vector<AccuracyRecord>& records, const std::string& method) {
  double sum = 0.0;
  int k = 0;
  for (const auto& a : records) {
    if (a.method == method) {
      sum += std::abs(a.r);
      ++k;
    }
  }
  return sum / k;
}

double mean_r(const std::vector<AccuracyRecord>& records, const std::string& method) {
  double sum = 0.0;
  int k = 0;
  for (const auto& a : records) {
    if (a.method == method) {
      sum += a.r;
      ++k;
    }
  }
  return sum / k;
}

predict::CvConfig cv_config(std::uint64_t seed) {
  predict::CvConfig cfg;
  cfg.conditions = {"Rest1"};
  cfg.categories = {"Construct"};
  cfg.repeats = 5;
  cfg.sampler.burn_in = 500;
  cfg.sampler.samples = 1000;
  cfg.sampler.inits = 2;
  cfg.sampler.seed = seed;
  return cfg;
}

Outcome null_control() {
  const auto sim = recovery_sim({});
  const auto data = model::make_fit_data(sim.dataset, "Rest1", "Construct");
  const Eigen::VectorXd est = model::posterior_summary(run_chains(data, 2)).means();
  const double cov_abs = est.cwiseAbs().mean();

  // Held-out correlations from 8-subject test folds have a null spread of
  // about 0.36, so the CV half uses 500 subjects (50 per test fold).
  const auto big = recovery_sim({}, 500, 0.5, 12);
  const auto cv = predict::cross_validate(big.dataset, cv_config(12));
  const auto& recs = cv.accuracy.records;
  const double r_latent = mean_abs_r(recs, kMethodLatent);
  return {cov_abs <= 0.1 && r_latent <= 0.15,
          fmt("mean |cov_mean| %.3f (<= 0.1, n=80); CV mean |r| latentsna %.3f (<= 0.15, n=500, 5 repeats; "
              "cpm %.3f, ridge %.3f)",
              cov_abs, r_latent, mean_abs_r(recs, kMethodCpm), mean_abs_r(recs, kMethodRidge))};
}

Outcome predictive_signal() {
  // Scale the recovery pattern so that the construct R^2 given the node
  // latents, sum(cross^2) with unit variances, is 0.5.
  double ss = 0.0;
  for (double c : kRecoveryCross) ss += c * c;
  std::vector<double> cross = kRecoveryCross;
  for (auto& c : cross) c *= std::sqrt(0.5 / ss);
  const auto sim = recovery_sim(cross, 150, 0.3, 11);
  const auto cv = predict::cross_validate(sim.dataset, cv_config(11));
  const auto& recs = cv.accuracy.records;
  const double latent = mean_r(recs, kMethodLatent), cpm = mean_r(recs, kMethodCpm),
               ridge = mean_r(recs, kMethodRidge);
  return {latent >= 0.5 && latent >= cpm - 0.05 && latent >= ridge - 0.05,
          fmt("construct R^2 %.2f; mean r latentsna %.3f (>= 0.5), cpm %.3f, ridge %.3f (latentsna >= each - 0.05)",
              0.5, latent, cpm, ridge)};
}

Outcome conditional_oracle() {
  int checks = 0, bad = 0;
  std::string first;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    oracle::ConditionalReport report;
    oracle::check_conditionals(fixtures::tiny_problem(1000 + seed), report);
    checks += report.checks;
    bad += static_cast<int>(report.mismatches.size());
    if (first.empty() && !report.mismatches.empty()) {
      const auto& m = report.mismatches.front();
      first = fmt("; first: %s mean %.4f vs %.4f, var %.4f vs %.4f", m.parameter.c_str(), m.expected_mean,
                  m.grid_mean, m.expected_var, m.grid_var);
    }
  }
  return {bad == 0 && checks == 400, fmt("%d conditionals over 20 states, %d mismatches%s", checks, bad, first.c_str())};
}

Outcome log_joint_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto t = fixtures::tiny_problem(5000 + seed, 2 + seed % 3, 2 + seed % 2, 1 + seed % 2);
    const double got = model::log_joint(t.state, t.data);
    const double want = static_cast<double>(oracle::log_joint<oracle::mp>(t.state, t.data, model::Priors{}));
    worst = std::max(worst, std::abs(got - want));
  }
  return {worst <= 1e-8, fmt("max |log_joint - 50-digit oracle| over 50 states %.2e (<= 1e-8)", worst)};
}

Outcome ols_oracle_check() {
  Random rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int q = 2 + rep % 6, n = q + 5 + rep % 40;
    Eigen::MatrixXd x(n, q);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (int c = 1; c < q; ++c) x(i, c) = rng.normal(0.0, 1.0 + c);
      y(i) = rng.normal(0.2 * x(i, q - 1), 1.0);
    }
    std::vector<std::string> names;
    for (int c = 0; c < q; ++c) names.push_back("x" + std::to_string(c));
    const auto got = analysis::ols(y, x, names);
    const auto want = oracle::ols_oracle(y, x);
    for (int c = 0; c < q; ++c) {
      const auto& t = got.terms[static_cast<std::size_t>(c)];
      worst = std::max({worst, std::abs(t.estimate - want.beta[static_cast<std::size_t>(c)]),
                        std::abs(t.std_error - want.se[static_cast<std::size_t>(c)])});
    }
    worst = std::max(worst, std::abs(got.r_squared - want.r_squared));
  }
  int codes_ok = 0, codes = 0;
  const std::vector<std::tuple<double, const char*, const char*>> cuts{
      {0.001, "***", "**"}, {0.01, "**", "*"}, {0.05, "*", "."}, {0.1, ".", " "}};
  for (const auto& [cut, below, at] : cuts) {
    codes_ok += analysis::sig_code(cut - 1e-12) == below;
    codes_ok += analysis::sig_code(cut) == at;
    codes_ok += analysis::sig_code(cut + 1e-12) == at;
    codes += 3;
  }
  return {worst <= 1e-8 && codes_ok == codes,
          fmt("max deviation from normal equations over 100 fits %.2e (<= 1e-8); significance codes %d/%d", worst,
              codes_ok, codes)};
}

Outcome injected_effect() {
  Random rng(719);
  std::vector<AccuracyRecord> recs;
  for (auto c : analysis::kConditionLevels) {
    for (int i = 0; i < 7; ++i) {
      for (int r = 0; r < 5; ++r) {
        const double shift = c == "EN-back" ? -0.19 : 0.0;
        recs.push_back({kMethodLatent, std::string(c), "NegEmo", "ind" + std::to_string(i), r,
                        rng.normal(0.45 + shift, 0.08), 20});
      }
    }
  }
  const auto fit = analysis::condition_effect_regression(recs);
  const auto& t = fit.result.term("EN-back");
  const double dev = std::abs(t.estimate + 0.19);
  return {dev <= 2.0 * t.std_error,
          fmt("EN-back estimate %.4f (SE %.4f, %s) vs injected -0.19; |dev| %.4f <= 2 SE on %zu records", t.estimate,
              t.std_error, t.sig_code.c_str(), dev, recs.size())};
}

Outcome convergence() {
  const auto sim = recovery_sim(kRecoveryCross);
  const auto data = model::make_fit_data(sim.dataset, "Rest1", "Construct");
  const auto chains = run_chains(data, 4);
  const auto dir = fixtures::scratch_dir("acceptance_trace");
  model::write_trace_csv(chains, dir / "trace.csv");
  const auto trace = model::read_trace_csv(dir / "trace.csv");
  bool loads = trace.chain_ids.size() == 4 && trace.cov.size() == 4;
  for (const auto& chain : trace.cov) {
    loads = loads && chain.size() == static_cast<std::size_t>(kV);
    for (const auto& node : chain) {
      loads = loads && node.size() == 2000u;
      for (double x : node) loads = loads && std::isfinite(x);
    }
  }
  const auto diag = analysis::diagnose(trace);
  int good = 0;
  double worst = 0.0;
  for (const auto& d : diag) {
    good += d.rhat < 1.1;
    worst = std::max(worst, d.rhat);
  }
  const double share = static_cast<double>(good) / static_cast<double>(diag.size());
  return {loads && share >= 0.95,
          fmt("split R-hat < 1.1 for %d/%zu nodes (%.0f%%, need >= 95%%), max %.3f; trace reload %s", good,
              diag.size(), 100.0 * share, worst, loads ? "ok (4 chains x 30 nodes x 2000 draws)" : "FAILED")};
}

int shell(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome determinism() {
  const std::string exe = CPREDICT_CLI_PATH;
  const auto root = fixtures::scratch_dir("acceptance_determinism");
  const auto data = root / "data";
  if (shell(exe + " simulate --V 10 --subjects 40 --P 3 --conditions Rest1,SST --seed 3 --out " + data.string()) != 0) {
    return {false, "simulate failed"};
  }
  const std::string cv = exe + " cv --manifest " + (data / "manifest.json").string() +
                         " --repeats 2 --burn-in 50 --samples 100 --inits 2 --seed 17 --out ";
  if (shell(cv + (root / "a").string()) != 0 || shell(cv + (root / "b").string()) != 0) return {false, "cv failed"};
  const auto a = report::read_manifest(root / "a"), b = report::read_manifest(root / "b");
  int compared = 0, same = 0;
  for (const auto& f : a.outputs) {
    if (f.kind != "accuracy" && f.kind != "accuracy_mean" && f.kind != "summary" && f.kind != "predictions") continue;
    ++compared;
    same += fs::exists(root / "b" / f.path) &&
            sha256_file(root / "a" / f.path) == sha256_file(root / "b" / f.path);
  }
  const bool all_same = compared > 0 && same == compared && a.outputs.size() == b.outputs.size();
  return {all_same, fmt("%d/%d accuracy, summary and prediction files byte-identical across two cv runs", same, compared)};
}

Outcome biomarker_pipeline() {
  // 40 nodes: 1-12 Default Mode, 13-20 Motor, rest Limbic. Positives are
  // nodes 1-10, negatives 11-20, giving 12 Default Mode and 8 Motor.
  ingest::Atlas atlas;
  model::PosteriorSummary summary;
  for (int id = 1; id <= 40; ++id) {
    const auto net = id <= 12 ? ingest::Network::DefaultMode
                              : id <= 20 ? ingest::Network::Motor : ingest::Network::Limbic;
    atlas.entries.push_back({id, net, {}, {}});
    const double cov = id <= 10 ? 1.0 + id : id <= 20 ? -1.0 - id : 0.01 * (id - 30);
    summary.nodes.push_back({id, cov, 0.1, 0.0, 0.0});
  }
  const auto bio = analysis::top_biomarkers(summary, 10);
  const auto counts = analysis::network_counts(bio, atlas);
  bool ok = counts[0] == 12.0 && counts[static_cast<std::size_t>(ingest::Network::Motor)] == 8.0;
  double total = 0.0;
  for (double c : counts) total += c;
  ok = ok && total == 20.0;

  auto dmn = [](double v) {
    analysis::NetworkCounts c{};
    c[0] = v;
    return c;
  };
  const auto avg = analysis::rest_task_average(
      {{"Rest1", dmn(5)}, {"Rest2", dmn(6)}, {"gradCPT", dmn(4)}, {"EN-back", dmn(6)}, {"SST", dmn(7)}, {"Eyes", dmn(6.5)}});
  ok = ok && avg.rest[0] == 5.5 && avg.task[0] == 5.875;
  return {ok, fmt("Default Mode %.0f (12), Motor %.0f (8), total %.0f (20); rest %.3f (5.5), task %.3f (5.875)",
                  counts[0], counts[static_cast<std::size_t>(ingest::Network::Motor)], total, avg.rest[0],
                  avg.task[0])};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"parameter recovery", parameter_recovery},
      {"null control", null_control},
      {"predictive signal", predictive_signal},
      {"conditional sampler oracle", conditional_oracle},
      {"log_joint oracle", log_joint_oracle},
      {"OLS oracle and significance codes", ols_oracle_check},
      {"injected condition effect", injected_effect},
      {"convergence diagnostics", convergence},
      {"cv determinism", determinism},
      {"biomarker pipeline", biomarker_pipeline},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] criterion %zu: %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
