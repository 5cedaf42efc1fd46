#include <benchmark/benchmark.h>

#include <riskbound/bounds.hpp>
#include <riskbound/integrate.hpp>
#include <riskbound/model.hpp>
#include <riskbound/optimize.hpp>

namespace {

riskbound::ScalarModel gaussian_pair() {
  riskbound::GaussianGaussianSpec spec;
  spec.var_prior = 1.0;
  spec.var_noise = 1.0;
  spec.n_obs = 1;
  return riskbound::make_model(spec);
}

void BM_ExpectJoint(benchmark::State& state) {
  const riskbound::ScalarModel m = gaussian_pair();
  riskbound::IntegrationConfig cfg;
  cfg.nodes_per_axis = static_cast<int>(state.range(0));
  const auto f = [](double y, double t) { return (t - 0.5 * y) * (t - 0.5 * y); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskbound::expect_joint(m, f, cfg));
  }
}
BENCHMARK(BM_ExpectJoint)->Arg(65)->Arg(129)->Arg(257);

void BM_ExactRisk(benchmark::State& state) {
  const riskbound::ScalarModel m = gaussian_pair();
  riskbound::IntegrationConfig cfg;
  cfg.nodes_per_axis = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskbound::bayes_risk_exact(m, cfg));
  }
}
BENCHMARK(BM_ExactRisk)->Arg(65)->Arg(129);

void BM_BoundGlobal(benchmark::State& state) {
  const riskbound::ScalarModel m = gaussian_pair();
  riskbound::IntegrationConfig cfg;
  cfg.nodes_per_axis = static_cast<int>(state.range(0));
  riskbound::PsiSpec spec;
  spec.family = riskbound::PsiFamily::ww;
  spec.h = 1.0;
  spec.s = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskbound::bound_global(m, spec, cfg));
  }
}
BENCHMARK(BM_BoundGlobal)->Arg(65)->Arg(129);

void BM_BoundWw(benchmark::State& state) {
  const riskbound::ScalarModel m = gaussian_pair();
  riskbound::IntegrationConfig cfg;
  cfg.nodes_per_axis = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskbound::bound_ww(m, 1.0, 0.5, cfg));
  }
}
BENCHMARK(BM_BoundWw)->Arg(65)->Arg(129);

void BM_SweepRow(benchmark::State& state) {
  const riskbound::ScalarModel m = gaussian_pair();
  riskbound::IntegrationConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskbound::sweep(m, riskbound::PsiFamily::ww,
                                              riskbound::BoundFlavor::ww,
                                              {1.0}, {0.5}, cfg));
  }
}
BENCHMARK(BM_SweepRow);

}  // namespace

BENCHMARK_MAIN();
