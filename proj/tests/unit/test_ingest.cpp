#include "fixtures.hpp"

#include "cpredict/csv.hpp"
#include "cpredict/ingest.hpp"
#include "cpredict/simulate.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>

using namespace cpredict;
using namespace cpredict::ingest;

TEST_SUITE("ingest") {

TEST_CASE("fisher_z") {
  CHECK(fisher_z(0.0) == 0.0);
  CHECK(fisher_z(0.5) == doctest::Approx(0.5493061443340549));
  CHECK_THROWS_AS(fisher_z(1.0), DomainError);
  try {
    fisher_z(-1.5, "m.csv cell (2,3)");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("(2,3)") != std::string::npos);
  }
}

TEST_CASE("prepare_connectome canonicalizes and validates") {
  Eigen::MatrixXd raw(3, 3);
  raw << 1, 0.5, 0.2, 0.5 + 5e-7, 1, -0.3, 0.2, -0.3, 1;
  const auto m = prepare_connectome(raw, Scale::Pearson, "m");
  CHECK(m.diagonal().isZero());
  CHECK(m(0, 1) == m(1, 0));
  CHECK(m(1, 2) == doctest::Approx(std::atanh(-0.3)));

  Eigen::MatrixXd asym = raw;
  asym(2, 0) = 0.21;
  CHECK_THROWS_AS(prepare_connectome(asym, Scale::FisherZ, "m"), DataError);
  Eigen::MatrixXd bad = raw;
  bad(0, 2) = bad(2, 0) = std::nan("");
  CHECK_THROWS_AS(prepare_connectome(bad, Scale::FisherZ, "m"), DataError);
  Eigen::MatrixXd one = raw;
  one(0, 2) = one(2, 0) = 1.0;
  CHECK_THROWS_AS(prepare_connectome(one, Scale::Pearson, "m"), DomainError);
  CHECK(prepare_connectome(one, Scale::FisherZ, "m")(0, 2) == 1.0);
}

TEST_CASE("network names are canonical and case sensitive") {
  for (auto n : kAllNetworks) CHECK(parse_network(network_name(n)) == n);
  CHECK(parse_network("Fronto-parietal") == Network::FrontoParietal);
  CHECK_FALSE(parse_network("fronto-parietal").has_value());
}

TEST_CASE("atlas ids must be 1..V") {
  Atlas a;
  a.entries = {{2, Network::Motor, {}, {}}, {1, Network::Limbic, {}, {}}};
  validate_atlas(a);
  CHECK(a.entries.front().node_id == 1);
  CHECK(a.network_of(2) == Network::Motor);
  CHECK_THROWS_AS(a.network_of(3), DataError);
  Atlas gap;
  gap.entries = {{1, Network::Motor, {}, {}}, {3, Network::Motor, {}, {}}};
  CHECK_THROWS_AS(validate_atlas(gap), DataError);
}

TEST_CASE("standardization uses observed entries and the n-1 sd") {
  BehaviorPanel p;
  p.category = "c";
  p.subject_ids = {"a", "b", "c", "d"};
  p.indicators = {"x"};
  p.values.resize(4, 1);
  p.values << 1, 2, 3, std::nan("");
  p.observed.resize(4, 1);
  p.observed << true, true, true, false;
  const auto s = standardize_behaviors(p);
  CHECK(s.scaling[0].mean == doctest::Approx(2.0));
  CHECK(s.scaling[0].sd == doctest::Approx(1.0));
  CHECK(s.values(2, 0) == doctest::Approx(1.0));
  CHECK(std::isnan(s.values(3, 0)));

  p.values << 2, 2, 2, 0;
  CHECK_THROWS_AS(standardize_behaviors(p), DataError);
}

TEST_CASE("masking hides values and keeps shape") {
  BehaviorPanel p;
  p.subject_ids = {"a", "b"};
  p.indicators = {"x", "y"};
  p.values = Eigen::MatrixXd::Ones(2, 2);
  p.observed.setConstant(2, 2, true);
  const auto m = p.masked({1});
  CHECK_FALSE(m.observed(1, 0));
  CHECK(std::isnan(m.values(1, 1)));
  CHECK(m.observed(0, 1));
  CHECK(p.row_of("b") == 1);
  CHECK_FALSE(p.row_of("z").has_value());
}

TEST_CASE("load_dataset resolves paths against the manifest and builds the average condition") {
  const auto dir = fixtures::scratch_dir("ingest_load");
  const auto sigma = model::make_latent_covariance(5, {0.3});
  auto params = model::make_gen_params(5, 12, 2, sigma, 0.25, 0.5, 1.0, 0.1, 3);
  params.conditions = {"Rest1", "Rest2"};
  const auto sim = model::simulate(params, 4);
  model::write_simulation(sim, params, dir);

  auto ds = load_dataset(dir / "manifest.json");
  CHECK(ds.V == 5);
  CHECK(ds.subjects().size() == 12u);
  CHECK(ds.conditions == std::vector<std::string>{"Rest1", "Rest2"});
  const auto& c = ds.connectome("sub-0001", "Rest1").matrix;
  CHECK((c - sim.dataset.connectome("sub-0001", "Rest1").matrix).cwiseAbs().maxCoeff() == 0.0);

  add_average_condition(ds, {"Rest1", "Rest2"});
  const auto& avg = ds.connectome("sub-0002", std::string(kAverageCondition)).matrix;
  const Eigen::MatrixXd want =
      0.5 * (ds.connectome("sub-0002", "Rest1").matrix + ds.connectome("sub-0002", "Rest2").matrix);
  CHECK(avg.isApprox(want));

  // average_from in the manifest has the same effect
  std::ifstream in(dir / "manifest.json");
  auto j = nlohmann::json::parse(in);
  j["average_from"] = {"Rest1", "Rest2"};
  std::ofstream(dir / "manifest_avg.json") << j.dump();
  CHECK(load_dataset(dir / "manifest_avg.json").has_connectome("sub-0003", "Average"));
}

TEST_CASE("missing connectome or malformed inputs are errors") {
  const auto dir = fixtures::scratch_dir("ingest_bad");
  const auto sim = fixtures::make_sim(4, 10, 1, {0.2}, 0.25, 0.5, 5);
  const auto sigma = model::make_latent_covariance(4, {0.2});
  const auto params = model::make_gen_params(4, 10, 1, sigma, 0.25, 0.5, 1.0, 0.1, 5);
  model::write_simulation(model::simulate(params, 6), params, dir);
  std::ifstream in(dir / "manifest.json");
  auto j = nlohmann::json::parse(in);
  j["connectomes"].erase(j["connectomes"].begin());
  std::ofstream(dir / "m2.json") << j.dump();
  CHECK_THROWS_AS(load_dataset(dir / "m2.json"), DataError);
  CHECK_THROWS_AS(load_dataset(dir / "absent.json"), DataError);
  CHECK_THROWS_AS(sim.dataset.connectome("nobody", "Rest1"), DataError);
  CHECK_THROWS_AS(sim.dataset.behavior("Nope"), DataError);
}

TEST_CASE("behavior panel reads NA and blanks as missing") {
  const auto dir = fixtures::scratch_dir("ingest_panel");
  std::ofstream(dir / "b.csv") << "subject_id,x,y\ns1,1.5,NA\ns2,,2\n";
  const auto p = read_behavior_panel(dir / "b.csv", "cat");
  CHECK(p.observed(0, 0));
  CHECK_FALSE(p.observed(0, 1));
  CHECK_FALSE(p.observed(1, 0));
  CHECK(p.values(1, 1) == 2.0);
  std::ofstream(dir / "dup.csv") << "subject_id,x\ns1,1\ns1,2\n";
  CHECK_THROWS_AS(read_behavior_panel(dir / "dup.csv", "cat"), DataError);
}

}
