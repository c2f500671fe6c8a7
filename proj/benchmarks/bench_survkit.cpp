#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "survkit/bart.hpp"
#include "survkit/cox.hpp"
#include "survkit/dataset.hpp"
#include "survkit/estimators.hpp"
#include "survkit/metrics.hpp"
#include "survkit/rng.hpp"
#include "survkit/rsf.hpp"
#include "survkit/sim.hpp"

namespace {

using namespace survkit;

SurvDataset ph_sample(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x62656e63, 0);
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= kSimCovariates; ++j) names.push_back("x" + std::to_string(j));
  Schema schema;
  for (const auto& name : names) schema.covariates.push_back({name, false, {}});
  const std::vector<double> x = gen_covariates(n, rng);
  std::vector<double> times;
  std::vector<int> events;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> row(x.begin() + static_cast<std::ptrdiff_t>(i * kSimCovariates),
                                  x.begin() + static_cast<std::ptrdiff_t>((i + 1) * kSimCovariates));
    const auto [alpha, lambda] = weibull_params(row, SimKind::kPh);
    const double t = sample_event_time(alpha, lambda, rng);
    const double c = -std::log(1.0 - sample_uniform(rng)) * 4.0 * lambda;
    times.push_back(std::min(t, c));
    events.push_back(t <= c ? 1 : 0);
  }
  return SurvDataset(std::move(schema), std::move(times), std::move(events), x);
}

void BM_KaplanMeier(benchmark::State& state) {
  const SurvDataset data = ph_sample(100000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kaplan_meier(data));
}
BENCHMARK(BM_KaplanMeier)->Unit(benchmark::kMillisecond);

void BM_CoxFit(benchmark::State& state) {
  const SurvDataset data = ph_sample(2000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_cox(data));
}
BENCHMARK(BM_CoxFit)->Unit(benchmark::kMillisecond);

void BM_ForestFit(benchmark::State& state) {
  const SurvDataset data = ph_sample(300, 3);
  RsfConfig config;
  config.n_trees = 50;
  config.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(fit_forest(data, config, 1));
}
BENCHMARK(BM_ForestFit)->Unit(benchmark::kMillisecond);

void BM_BartSweep(benchmark::State& state) {
  const SurvDataset data = ph_sample(200, 4);
  const ExpandedData expanded = expand_survival_data(data, time_grid(data, 100));
  BartPriors priors;
  BartState chain = init_bart_state(expanded, priors);
  Rng rng = make_rng(4, 0x62656e63, 1);
  for (auto _ : state) mcmc_step(chain, expanded, priors, rng);
}
BENCHMARK(BM_BartSweep)->Unit(benchmark::kMillisecond);

void BM_Concordance(benchmark::State& state) {
  const SurvDataset data = ph_sample(10000, 5);
  Rng rng = make_rng(5, 0x62656e63, 2);
  std::vector<double> scores(data.n());
  for (double& s : scores) s = sample_uniform(rng);
  for (auto _ : state) benchmark::DoNotOptimize(concordance_index(scores, data));
}
BENCHMARK(BM_Concordance)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
