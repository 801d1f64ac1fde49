#pragma once

#include "iplpmb/metrics.hpp"
#include "iplpmb/scenario.hpp"
#include "iplpmb/slam_filter.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace iplpmb {

struct StepRecord {
  int step = 0;
  GospaResult gospa_va;
  GospaResult gospa_sp;
  UeEstimate ue;
  double pos_err = 0.0;          // m, horizontal distance
  double heading_err_deg = 0.0;  // signed, wrapped
  double bias_err = 0.0;         // m, signed
  double iterations = 0.0;       // mean over hypotheses that detected something
  double predict_ms = 0.0;
  double update_ms = 0.0;
  double step_ms = 0.0;
  std::size_t measurements = 0;
  std::size_t hypotheses = 0;
  std::size_t dropped_hypotheses = 0;
  std::size_t bernoullis = 0;
  // Invariant probes.
  double weight_sum = 0.0;
  bool covariances_psd = true;  // UE and every landmark density
  bool existence_in_range = true;
  double min_contraction_eig = 0.0;  // only filled when the filter checks contraction
};

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  int failed_step = 0;
  std::string error;
  std::vector<StepRecord> steps;
};

/// Mean and population standard deviation across successful runs.
struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

[[nodiscard]] Stat mean_std(std::span<const double> values);

struct StepAggregate {
  int step = 0;
  Stat gospa_va;
  Stat gospa_sp;
  Stat pos_err;
  Stat heading_err_deg;
  Stat bias_err;
  Stat pos_std;  // filter-reported
  Stat iterations;
  Stat predict_ms;
  Stat update_ms;
  double pos_rmse = 0.0;
  double heading_rmse_deg = 0.0;
  double bias_rmse = 0.0;
};

struct MonteCarloOptions {
  Linearizer linearizer = Linearizer::Posterior;
  int runs = 1;
  std::uint64_t base_seed = 1;
  int threads = 1;
};

struct MonteCarloResult {
  std::vector<RunRecord> runs;
  std::vector<StepAggregate> per_step;
  UeErrorSummary ue;
  GospaResult initial_gospa_va;  // empty map against the truth
  GospaResult initial_gospa_sp;
  std::size_t failed_runs = 0;
  double mean_iterations = 0.0;  // over steps and runs with a detection
  double mean_predict_ms = 0.0;
  double mean_update_ms = 0.0;
};

/// One seeded run. Seeds the prior draw and the measurement stream from `seed`, so
/// both linearizers see identical data for the same seed. Errors thrown by the
/// filter are captured in the record.
[[nodiscard]] RunRecord run_single(const ExperimentConfig& config, const GroundTruth& truth, Linearizer linearizer,
                                   int run, std::uint64_t seed);

/// Runs r = 0..runs-1 with seed base_seed + r on up to `threads` workers. Output does
/// not depend on the number of threads.
[[nodiscard]] MonteCarloResult run_monte_carlo(const ExperimentConfig& config, const MonteCarloOptions& options);

/// Per-step statistics over the successful runs in `runs`.
[[nodiscard]] MonteCarloResult aggregate_runs(std::vector<RunRecord> runs, const GroundTruth& truth,
                                              const GospaConfig& gospa_cfg);

}  // namespace iplpmb
