#include "iplpmb/monte_carlo.hpp"

#include "iplpmb/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <thread>

namespace iplpmb {

namespace {

constexpr std::uint64_t kPriorStream = 0;
constexpr std::uint64_t kMeasurementStream = 1;

bool map_invariants_hold(const PmbMap& map, bool& psd) {
  bool in_range = true;
  for (const auto& b : map.bernoullis) {
    if (!(b.existence >= 0.0 && b.existence <= 1.0)) {
      in_range = false;
    }
    for (const auto& d : b.kind_densities) {
      if (d && !d->is_psd()) {
        psd = false;
      }
    }
  }
  return in_range;
}

}  // namespace

Stat mean_std(std::span<const double> values) {
  if (values.empty()) {
    return {};
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) {
    sq += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

RunRecord run_single(const ExperimentConfig& config, const GroundTruth& truth, Linearizer linearizer, int run,
                     std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  RunRecord rec;
  rec.run = run;
  rec.seed = seed;

  const ScenarioConfig& sc = config.scenario;
  auto model = std::make_shared<GeometryModel>(sc.bs_position);
  FilterConfig fc = config.filter;
  fc.linearizer = linearizer;
  const PmbSlamFilter filter(model, sc.sensor,
                             constant_turn_motion(sc.trajectory.speed, sc.trajectory.turn_rate,
                                                  sc.trajectory.step_duration, sc.process_noise),
                             fc);

  std::mt19937_64 prior_rng = make_stream(seed, kPriorStream);
  std::mt19937_64 meas_rng = make_stream(seed, kMeasurementStream);

  std::normal_distribution<double> normal(0.0, 1.0);
  Vector mean = sc.trajectory.initial.to_vector();
  for (Eigen::Index i = 0; i < kUeDim; ++i) {
    mean[i] += config.initial_std[i] * normal(prior_rng);
  }
  mean[kHeadingIndex] = wrap_angle(mean[kHeadingIndex]);
  FilterState state{GaussianDensity(mean, config.initial_std.array().square().matrix().asDiagonal()), PmbMap{},
                    0};
  state.map.ppp = config.ppp;

  const std::vector<Eigen::Vector3d> va_truth = truth.positions(LandmarkKind::VA);
  const std::vector<Eigen::Vector3d> sp_truth = truth.positions(LandmarkKind::SP);

  for (int k = 1; k <= sc.trajectory.steps; ++k) {
    const std::vector<Measurement> z = simulate_measurements(truth, k, *model, sc.sensor, meas_rng);
    StepRecord s;
    s.step = k;
    s.measurements = z.size();
    const auto t0 = Clock::now();
    StepResult res;
    try {
      res = filter.step(state, z);
    } catch (const Error& e) {
      rec.failed = true;
      rec.failed_step = k;
      rec.error = e.what();
      return rec;
    }
    s.step_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    state = std::move(res.state);
    const StepDiagnostics& d = res.diagnostics;

    const MapEstimate est = extract_map_estimate(state.map, config.r_estimate);
    s.gospa_va = gospa(va_truth, est.va, config.gospa);
    s.gospa_sp = gospa(sp_truth, est.sp, config.gospa);
    s.ue = UeEstimate::from_density(state.ue);
    const UEState& t = truth.ue_states[static_cast<std::size_t>(k)];
    s.pos_err = std::hypot(s.ue.mean[0] - t.position.x(), s.ue.mean[1] - t.position.y());
    s.heading_err_deg = heading_error_deg(s.ue.mean[kHeadingIndex], t.heading);
    s.bias_err = s.ue.mean[kBiasIndex] - t.clock_bias;
    s.iterations = d.mean_iterations;
    s.predict_ms = d.predict_ms;
    s.update_ms = d.update_ms;
    s.hypotheses = d.hypotheses;
    s.dropped_hypotheses = d.dropped_hypotheses;
    s.bernoullis = state.map.bernoullis.size();
    s.weight_sum = 0.0;
    for (double w : d.weights) {
      s.weight_sum += w;
    }
    s.covariances_psd = state.ue.is_psd();
    s.existence_in_range = map_invariants_hold(state.map, s.covariances_psd);
    s.min_contraction_eig = d.min_contraction_eig;
    rec.steps.push_back(std::move(s));
  }
  return rec;
}

MonteCarloResult aggregate_runs(std::vector<RunRecord> runs, const GroundTruth& truth,
                                const GospaConfig& gospa_cfg) {
  MonteCarloResult out;
  out.runs = std::move(runs);
  out.initial_gospa_va = gospa(truth.positions(LandmarkKind::VA), {}, gospa_cfg);
  out.initial_gospa_sp = gospa(truth.positions(LandmarkKind::SP), {}, gospa_cfg);

  std::vector<const RunRecord*> ok;
  for (const auto& r : out.runs) {
    if (r.failed) {
      ++out.failed_runs;
    } else {
      ok.push_back(&r);
    }
  }
  if (ok.empty()) {
    return out;
  }
  const std::size_t steps = ok.front()->steps.size();
  std::vector<std::vector<UeEstimate>> estimates(ok.size());
  const std::span<const UEState> truth_steps(truth.ue_states.data() + 1, steps);

  double iter_sum = 0.0;
  std::size_t iter_n = 0;
  double predict_sum = 0.0;
  double update_sum = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    StepAggregate a;
    a.step = ok.front()->steps[t].step;
    std::vector<double> va, sp, pe, he, be, ps, it, pm, um;
    for (std::size_t r = 0; r < ok.size(); ++r) {
      const StepRecord& s = ok[r]->steps[t];
      va.push_back(s.gospa_va.total);
      sp.push_back(s.gospa_sp.total);
      pe.push_back(s.pos_err);
      he.push_back(s.heading_err_deg);
      be.push_back(s.bias_err);
      ps.push_back(s.ue.position_std());
      it.push_back(s.iterations);
      pm.push_back(s.predict_ms);
      um.push_back(s.update_ms);
      estimates[r].push_back(s.ue);
      if (s.iterations > 0.0) {
        iter_sum += s.iterations;
        ++iter_n;
      }
      predict_sum += s.predict_ms;
      update_sum += s.update_ms;
    }
    a.gospa_va = mean_std(va);
    a.gospa_sp = mean_std(sp);
    a.pos_err = mean_std(pe);
    a.heading_err_deg = mean_std(he);
    a.bias_err = mean_std(be);
    a.pos_std = mean_std(ps);
    a.iterations = mean_std(it);
    a.predict_ms = mean_std(pm);
    a.update_ms = mean_std(um);
    auto rms = [](const std::vector<double>& v) {
      double sq = 0.0;
      for (double x : v) {
        sq += x * x;
      }
      return std::sqrt(sq / static_cast<double>(v.size()));
    };
    a.pos_rmse = rms(pe);
    a.heading_rmse_deg = rms(he);
    a.bias_rmse = rms(be);
    out.per_step.push_back(a);
  }
  const auto samples = static_cast<double>(steps * ok.size());
  out.mean_iterations = iter_n > 0 ? iter_sum / static_cast<double>(iter_n) : 0.0;
  out.mean_predict_ms = predict_sum / samples;
  out.mean_update_ms = update_sum / samples;
  out.ue = ue_error_summary(estimates, truth_steps);
  return out;
}

MonteCarloResult run_monte_carlo(const ExperimentConfig& config, const MonteCarloOptions& options) {
  if (options.runs < 1) {
    throw InvalidArgument("run_monte_carlo: runs must be >= 1");
  }
  config.validate();
  const GroundTruth truth = generate_scenario(config.scenario);

  std::vector<RunRecord> records(static_cast<std::size_t>(options.runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < options.runs; r = next++) {
      records[static_cast<std::size_t>(r)] =
          run_single(config, truth, options.linearizer, r, options.base_seed + static_cast<std::uint64_t>(r));
    }
  };
  const int n_threads = std::clamp(options.threads, 1, options.runs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
  }
  return aggregate_runs(std::move(records), truth, config.gospa);
}

}  // namespace iplpmb
