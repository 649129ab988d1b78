#include "cpredict/baselines.hpp"
#include "cpredict/random.hpp"

#include <benchmark/benchmark.h>

using namespace cpredict;

namespace {

struct Problem {
  Eigen::MatrixXd train, test;
  Eigen::VectorXd y;
};

Problem make_problem(int n, int edges) {
  Random rng(9);
  Problem p{Eigen::MatrixXd(n, edges), Eigen::MatrixXd(10, edges), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < edges; ++e) p.train(i, e) = rng.normal();
    p.y(i) = 0.5 * p.train(i, 0) + rng.normal();
  }
  for (int i = 0; i < 10; ++i) {
    for (int e = 0; e < edges; ++e) p.test(i, e) = rng.normal();
  }
  return p;
}

void BM_Cpm(benchmark::State& st) {
  const auto p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(baselines::cpm_fit_predict(p.train, p.y, p.test).predictions.data());
}
BENCHMARK(BM_Cpm)->Args({100, 435})->Args({100, 35778})->Unit(benchmark::kMillisecond);

void BM_RidgeInnerCv(benchmark::State& st) {
  const auto p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  const auto grid = baselines::default_lambda_grid();
  for (auto _ : st) {
    benchmark::DoNotOptimize(baselines::ridge_fit_predict(p.train, p.y, p.test, grid).predictions.data());
  }
}
BENCHMARK(BM_RidgeInnerCv)->Args({100, 435})->Args({100, 35778})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
