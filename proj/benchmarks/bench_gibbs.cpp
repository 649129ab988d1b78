#include "cpredict/model.hpp"
#include "cpredict/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace cpredict;

namespace {

model::FitData synthetic(int V, int n) {
  const auto sigma = model::make_latent_covariance(V, {0.4, -0.4, 0.3, -0.3});
  const auto params = model::make_gen_params(V, n, 4, sigma, 0.25, 0.5, 1.0, 0.1, 1);
  return model::make_fit_data(model::simulate(params, 2).dataset, "Rest1", "Construct");
}

void BM_GibbsSweep(benchmark::State& st) {
  const auto data = synthetic(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  auto state = model::init_state(data, 3);
  Random rng(4);
  long it = 0;
  for (auto _ : st) {
    model::gibbs_sweep(state, data, rng, {}, it++);
    benchmark::DoNotOptimize(state.Sigma.data());
  }
  st.counters["subjects"] = static_cast<double>(data.n());
}
BENCHMARK(BM_GibbsSweep)->Args({30, 80})->Args({30, 200})->Args({100, 80})->Unit(benchmark::kMillisecond);

void BM_LogJoint(benchmark::State& st) {
  const auto data = synthetic(static_cast<int>(st.range(0)), 80);
  const auto state = model::init_state(data, 3);
  for (auto _ : st) benchmark::DoNotOptimize(model::log_joint(state, data));
}
BENCHMARK(BM_LogJoint)->Arg(30)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
