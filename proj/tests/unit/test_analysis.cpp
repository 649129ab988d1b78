#include "ols_oracle.hpp"

#include "cpredict/analysis.hpp"
#include "cpredict/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace cpredict;
using namespace cpredict::analysis;
using ingest::Network;

namespace {

model::PosteriorSummary summary_of(const std::vector<double>& cov) {
  model::PosteriorSummary s;
  for (std::size_t i = 0; i < cov.size(); ++i) s.nodes.push_back({static_cast<int>(i + 1), cov[i], 0.1, 0, 0});
  return s;
}

ingest::Atlas atlas_by(const std::vector<Network>& nets) {
  ingest::Atlas a;
  for (std::size_t i = 0; i < nets.size(); ++i) a.entries.push_back({static_cast<int>(i + 1), nets[i], {}, {}});
  return a;
}

// Round-robin over all ten networks.
ingest::Atlas cyclic_atlas(int V) {
  std::vector<Network> nets;
  for (int i = 0; i < V; ++i) nets.push_back(ingest::kAllNetworks[static_cast<std::size_t>(i) % 10]);
  return atlas_by(nets);
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("top biomarkers on a five-node example") {
  const auto b = top_biomarkers(summary_of({0.9, -0.8, 0.1, -0.5, 0.95}), 2);
  CHECK(b.positive == std::vector<int>{5, 1});
  CHECK(b.negative == std::vector<int>{2, 4});
  CHECK_THROWS_AS(top_biomarkers(summary_of({1, 2, 3}), 2), AnalysisError);
  CHECK(top_biomarkers(summary_of({1, 2, 3}), 0).positive.empty());
}

TEST_CASE("biomarker ties go to the lower node id and sets stay disjoint") {
  const auto b = top_biomarkers(summary_of({0.5, 0.5, 0.5, 0.5}), 2);
  CHECK(b.positive == std::vector<int>{1, 2});
  CHECK(b.negative == std::vector<int>{3, 4});
}

TEST_CASE("network counts and rest/task averages") {
  std::vector<double> cov(40, 0.0);
  std::vector<Network> nets(40, Network::Limbic);
  for (int i = 0; i < 12; ++i) nets[static_cast<std::size_t>(i)] = Network::DefaultMode;
  for (int i = 12; i < 20; ++i) nets[static_cast<std::size_t>(i)] = Network::Motor;
  for (int i = 0; i < 10; ++i) cov[static_cast<std::size_t>(i)] = 1.0 + i;     // positives, DMN
  for (int i = 10; i < 20; ++i) cov[static_cast<std::size_t>(i)] = -1.0 - i;   // 2 DMN + 8 Motor
  const auto counts = network_counts(top_biomarkers(summary_of(cov), 10), atlas_by(nets));
  CHECK(counts[0] == 12.0);
  CHECK(counts[static_cast<std::size_t>(Network::Motor)] == 8.0);

  auto one = [](double v) {
    NetworkCounts c{};
    c[0] = v;
    return c;
  };
  const auto avg = rest_task_average({{"Rest1", one(5)}, {"Rest2", one(6)}, {"gradCPT", one(4)},
                                      {"EN-back", one(6)}, {"SST", one(7)}, {"Eyes", one(6.5)}});
  CHECK(avg.rest[0] == doctest::Approx(5.5));
  CHECK(avg.task[0] == doctest::Approx(5.875));
  CHECK_THROWS_AS(rest_task_average({{"Rest1", one(5)}}), AnalysisError);
}

TEST_CASE("ols reproduces an exact linear relation") {
  Random rng(3);
  Eigen::MatrixXd x(20, 3);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    x(i, 2) = rng.normal();
    y(i) = 2.0 - 1.5 * x(i, 1) + 0.25 * x(i, 2);
  }
  const auto r = ols(y, x, {"Intercept", "a", "b"});
  CHECK(r.term("Intercept").estimate == doctest::Approx(2.0));
  CHECK(r.term("a").estimate == doctest::Approx(-1.5));
  CHECK(r.term("b").estimate == doctest::Approx(0.25));
  CHECK(r.r_squared == doctest::Approx(1.0));
  CHECK(r.residual_df == 17);
}

TEST_CASE("ols agrees with a high-precision normal-equations oracle") {
  Random rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 15 + rep, q = 2 + rep % 4;
    Eigen::MatrixXd x(n, q);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (int c = 1; c < q; ++c) x(i, c) = rng.normal();
      y(i) = 0.3 * x(i, q - 1) + rng.normal();
    }
    std::vector<std::string> names;
    for (int c = 0; c < q; ++c) names.push_back("x" + std::to_string(c));
    const auto got = ols(y, x, names);
    const auto want = oracle::ols_oracle(y, x);
    for (int c = 0; c < q; ++c) {
      const auto& t = got.terms[static_cast<std::size_t>(c)];
      CHECK(t.estimate == doctest::Approx(want.beta[static_cast<std::size_t>(c)]).epsilon(1e-9));
      CHECK(t.std_error == doctest::Approx(want.se[static_cast<std::size_t>(c)]).epsilon(1e-9));
      CHECK(t.p_value == doctest::Approx(want.p[static_cast<std::size_t>(c)]).epsilon(1e-7));
    }
    CHECK(got.r_squared == doctest::Approx(want.r_squared).epsilon(1e-9));
  }
}

TEST_CASE("significance codes at the boundaries") {
  for (auto [cut, below, at] : std::vector<std::tuple<double, const char*, const char*>>{
           {0.001, "***", "**"}, {0.01, "**", "*"}, {0.05, "*", "."}, {0.1, ".", " "}}) {
    CHECK(sig_code(cut - 1e-12) == below);
    CHECK(sig_code(cut) == at);
    CHECK(sig_code(cut + 1e-12) == at);
  }
  CHECK(sig_code(0.0) == "***");
  CHECK(sig_code(1.0) == " ");
}

TEST_CASE("rank-deficient design names the collinear columns") {
  Eigen::MatrixXd x(10, 3);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    x(i, 2) = 2.0 * i;
    y(i) = i % 3;
  }
  try {
    ols(y, x, {"Intercept", "dose", "double_dose"});
    FAIL("expected rank deficiency");
  } catch (const AnalysisError& e) {
    const std::string msg = e.what();
    CHECK((msg.find("dose") != std::string::npos));
  }
  CHECK_THROWS_AS(ols(y.head(3), x.topRows(3), {"Intercept", "dose", "double_dose"}), AnalysisError);
}

TEST_CASE("condition regression") {
  std::vector<AccuracyRecord> recs;
  for (auto c : kConditionLevels) {
    for (int r = 0; r < 5; ++r) recs.push_back({kMethodLatent, std::string(c), "NegEmo", "x", r, 0.25, 20});
  }
  const auto flat = condition_effect_regression(recs);
  CHECK(flat.reference_condition == "Rest1");
  CHECK(flat.result.terms.size() == 7u);
  CHECK(flat.result.term("Intercept").estimate == doctest::Approx(0.25));
  for (const auto& t : flat.result.terms) {
    if (t.name != "Intercept") CHECK(std::abs(t.estimate) < 1e-12);
  }

  for (auto& r : recs) {
    if (r.condition == "EN-back") r.r = 0.06 + 0.01 * r.repeat;
  }
  const auto shifted = condition_effect_regression(recs);
  CHECK(shifted.result.term("EN-back").estimate == doctest::Approx(-0.17));

  std::erase_if(recs, [](const AccuracyRecord& r) { return r.condition == "gradCPT"; });
  CHECK_THROWS_AS(condition_effect_regression(recs), AnalysisError);
}

TEST_CASE("label regression recovers network means") {
  const auto atlas = cyclic_atlas(30);
  std::map<int, double> cov;
  for (const auto& e : atlas.entries) cov[e.node_id] = -0.1 * static_cast<int>(e.network);
  const auto signed_fit = label_effect_regression(cov, atlas, false);
  const auto abs_fit = label_effect_regression(cov, atlas, true);
  CHECK(signed_fit.terms.size() == 10u);
  CHECK(std::abs(signed_fit.term("Intercept").estimate) < 1e-12);
  for (std::size_t k = 1; k < 10; ++k) {
    const auto name = std::string(ingest::network_name(ingest::kAllNetworks[k]));
    CHECK(signed_fit.term(name).estimate == doctest::Approx(-0.1 * k));
    CHECK(abs_fit.term(name).estimate == doctest::Approx(0.1 * k));
  }
  CHECK(render_text(signed_fit, "label").find(std::string(kSignifLegend)) != std::string::npos);
  CHECK(to_json(signed_fit)["coefficients"].size() == 10u);
}

TEST_CASE("split R-hat") {
  Random rng(6);
  auto white = [&](double mean, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.normal(mean, 1.0);
    return v;
  };
  CHECK(rhat({white(0, 1000), white(0, 1000), white(0, 1000), white(0, 1000)}) < 1.05);
  CHECK(rhat({white(0, 500), white(100, 500)}) > 3.0);
  const auto same = white(0, 400);
  CHECK(rhat({same, same, same, same}) <= 1.0 + 1e-6);
  std::vector<double> trend(1000);
  for (std::size_t i = 0; i < trend.size(); ++i) trend[i] = 0.01 * static_cast<double>(i) + 0.1 * rng.normal();
  CHECK(rhat({trend, trend}) > 1.5);
}

TEST_CASE("effective sample size") {
  Random rng(7);
  std::vector<double> white(1000), ar(1000);
  double prev = 0.0;
  for (std::size_t i = 0; i < white.size(); ++i) {
    white[i] = rng.normal();
    prev = 0.9 * prev + rng.normal();
    ar[i] = prev;
  }
  CHECK(ess(white) >= 700.0);
  CHECK(ess(white) <= 1000.0);
  CHECK(ess(ar) < 200.0);
}

TEST_CASE("diagnose reports one row per node") {
  Random rng(8);
  model::TraceTable t;
  t.chain_ids = {0, 1};
  t.cov.assign(2, std::vector<std::vector<double>>(3, std::vector<double>(200)));
  for (auto& chain : t.cov) {
    for (auto& node : chain) {
      for (auto& x : node) x = rng.normal();
    }
  }
  const auto d = diagnose(t);
  REQUIRE(d.size() == 3u);
  CHECK(d[2].node_id == 3);
  CHECK(d[0].rhat < 1.1);
  CHECK(d[0].ess > 100.0);
}

}
