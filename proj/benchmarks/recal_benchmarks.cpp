// Copyright 2026 The recal Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <cmath>

#include "recal/absrisk.hpp"
#include "recal/cox.hpp"
#include "recal/el_weights.hpp"
#include "recal/recalib.hpp"
#include "recal/simlab.hpp"

namespace {

using namespace recal;

struct Data {
  Cohort source;
  Cohort target;
  CoxFit fit;
  TargetSummary summary;
};

const Data& data() {
  static const Data d = [] {
    ScenarioConfig cfg = scenario_preset("A1", "C4");
    SplitMix64 rng(17);
    Cohort s = generate_cohort(cfg, Population::Source, rng);
    Cohort t = generate_cohort(cfg, Population::Target, rng);
    CoxFit f = fit_cox(s);
    std::vector<double> times;
    for (int k = 1; k <= 60; ++k) times.push_back(k);
    TargetSummary sm = summarize_target(t, times, default_constraint_sets().back().items);
    return Data{std::move(s), std::move(t), std::move(f), std::move(sm)};
  }();
  return d;
}

void BM_FitCox(benchmark::State& state) {
  const Data& d = data();
  for (auto _ : state) benchmark::DoNotOptimize(fit_cox(d.source).beta_hat);
}
BENCHMARK(BM_FitCox)->Unit(benchmark::kMillisecond);

void BM_SolveElDual(benchmark::State& state) {
  const Data& d = data();
  Eigen::MatrixXd H = evaluate_constraints(d.source, *d.summary.constraints);
  for (auto _ : state) benchmark::DoNotOptimize(solve_el_dual(H, d.summary.constraints->targets).weights);
}
BENCHMARK(BM_SolveElDual)->Unit(benchmark::kMillisecond);

void BM_Recalibrate(benchmark::State& state) {
  const Data& d = data();
  RecalOptions opt;
  opt.diag_approx = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(recalibrate(d.source, d.fit, d.summary, Method::Weighted, opt).lambda0);
}
BENCHMARK(BM_Recalibrate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_AbsoluteRiskBatch(benchmark::State& state) {
  const Data& d = data();
  RecalResult r = recalibrate(d.source, d.fit, d.summary, Method::Weighted);
  CompetingHazard comp;
  comp.cumhaz = StepFunction({0.0, 60.0}, {0.0, 0.2});
  const int batch = static_cast<int>(state.range(0));
  for (auto _ : state) {
    double total = 0.0;
    for (int i = 0; i < batch; ++i) {
      Eigen::VectorXd z = d.target.covariates().row(i).transpose();
      AbsoluteRiskInput in = make_risk_input(d.fit, r, comp, z, 20.0, 30.0);
      total += absolute_risk(in) + absolute_risk_variance(in);
    }
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_AbsoluteRiskBatch)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SimulationReplicate(benchmark::State& state) {
  ScenarioConfig cfg = scenario_preset("A1", "C1");
  cfg.replicates = 1;
  cfg.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_scenario(cfg, {20.0, 40.0, 60.0}).rows);
    ++cfg.seed;
  }
}
BENCHMARK(BM_SimulationReplicate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
