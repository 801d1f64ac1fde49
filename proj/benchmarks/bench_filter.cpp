#include "iplpmb/scenario.hpp"
#include "iplpmb/slam_filter.hpp"

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

using namespace iplpmb;

namespace {

// Filter state after `warmup` steps of the default scenario, plus the next scan.
struct Warm {
  ExperimentConfig cfg;
  std::shared_ptr<GeometryModel> model;
  std::unique_ptr<PmbSlamFilter> filter;
  FilterState state;
  std::vector<Measurement> z;

  Warm(Linearizer linearizer, int warmup) {
    const GroundTruth truth = generate_scenario(cfg.scenario);
    model = std::make_shared<GeometryModel>(cfg.scenario.bs_position);
    const auto& tr = cfg.scenario.trajectory;
    FilterConfig fc = cfg.filter;
    fc.linearizer = linearizer;
    filter = std::make_unique<PmbSlamFilter>(
        model, cfg.scenario.sensor,
        constant_turn_motion(tr.speed, tr.turn_rate, tr.step_duration, cfg.scenario.process_noise), fc);
    const Vector var = cfg.initial_std.cwiseAbs2();
    state = FilterState{GaussianDensity(truth.ue_states[0].to_vector(), var.asDiagonal()), PmbMap{cfg.ppp, {}, 1}, 0};
    std::mt19937_64 rng = make_stream(cfg.scenario.seed, 1);
    for (int k = 1; k <= warmup; ++k) {
      state = filter->step(state, simulate_measurements(truth, k, *model, cfg.scenario.sensor, rng)).state;
    }
    z = simulate_measurements(truth, warmup + 1, *model, cfg.scenario.sensor, rng);
  }
};

void BM_FilterStep(benchmark::State& state) {
  const Warm w(state.range(0) == 0 ? Linearizer::Prior : Linearizer::Posterior, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(w.filter->step(w.state, w.z));
  }
  state.SetLabel(state.range(0) == 0 ? "EK" : "IPL");
}
BENCHMARK(BM_FilterStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
