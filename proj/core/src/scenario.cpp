#include "iplpmb/scenario.hpp"

#include "iplpmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace iplpmb {

Eigen::Vector3d mirror_point(const Eigen::Vector3d& p, const Plane& plane) {
  const double nn = plane.normal.squaredNorm();
  if (!(nn > 1e-24) || !plane.normal.allFinite() || !std::isfinite(plane.offset)) {
    throw DegeneratePlane("mirror_point: plane normal must be finite and non-zero");
  }
  return p - 2.0 * (plane.normal.dot(p) - plane.offset) / nn * plane.normal;
}

ScenarioConfig ScenarioConfig::make_default() {
  ScenarioConfig c;
  c.va_planes = {
      {Eigen::Vector3d::UnitX(), 100.0},
      {Eigen::Vector3d::UnitX(), -100.0},
      {Eigen::Vector3d::UnitY(), 100.0},
      {Eigen::Vector3d::UnitY(), -100.0},
  };
  c.sp_positions = {{65.0, 65.0, 10.0}, {-65.0, 65.0, 10.0}, {-65.0, -65.0, 10.0}, {65.0, -65.0, 10.0}};
  // Delays include the 300 m clock bias and VA paths of up to ~270 m.
  c.sensor.toa_max = 500.0;
  return c;
}

Matrix ScenarioConfig::default_process_noise() {
  Vector sd(kUeDim);
  sd << 0.2, 0.2, 0.0, 1e-3, 0.2;
  return sd.array().square().matrix().asDiagonal();
}

void ScenarioConfig::validate() const {
  if (trajectory.steps < 1) {
    throw InvalidArgument("trajectory.steps must be >= 1");
  }
  if (!(trajectory.step_duration > 0.0)) {
    throw InvalidArgument("trajectory.step_duration must be positive");
  }
  if (!(trajectory.speed >= 0.0) || !std::isfinite(trajectory.turn_rate)) {
    throw InvalidArgument("trajectory.speed must be >= 0 and turn_rate finite");
  }
  for (const auto& plane : va_planes) {
    const Eigen::Vector3d va = mirror_point(bs_position, plane);
    if ((va - bs_position).norm() < 1e-9) {
      throw DegeneratePlane("reflecting plane passes through the BS");
    }
  }
  const SensorModel& s = sensor;
  if (!(s.detection_prob >= 0.0 && s.detection_prob <= 1.0)) {
    throw InvalidArgument("sensor.detection_prob must lie in [0, 1]");
  }
  if (!(s.clutter_rate >= 0.0) || !(s.toa_max > 0.0) || !(s.fov_radius_sp > 0.0)) {
    throw InvalidArgument("sensor: clutter_rate >= 0, toa_max > 0 and fov_radius_sp > 0 are required");
  }
  if (s.noise_cov.rows() != kMeasDim || s.noise_cov.cols() != kMeasDim) {
    throw InvalidArgument("sensor.noise_cov must be 5x5");
  }
  if (process_noise.rows() != kUeDim || process_noise.cols() != kUeDim) {
    throw InvalidArgument("process_noise must be 5x5");
  }
}

PppIntensity ExperimentConfig::default_ppp() {
  PppIntensity ppp;
  ppp.region = Eigen::AlignedBox3d(Eigen::Vector3d(-250.0, -250.0, -20.0), Eigen::Vector3d(250.0, 250.0, 100.0));
  return ppp;
}

Vector ExperimentConfig::default_initial_std() {
  Vector sd(kUeDim);
  sd << 0.3, 0.3, 0.0, 0.3 * std::numbers::pi / 180.0, 0.3;
  return sd;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  gospa.validate();
  if (filter.gamma < 1) {
    throw InvalidArgument("filter.gamma must be >= 1");
  }
  if (initial_std.size() != kUeDim || (initial_std.array() < 0.0).any()) {
    throw InvalidArgument("initial_std must have 5 non-negative entries");
  }
  if (!(r_estimate > 0.0 && r_estimate < 1.0)) {
    throw InvalidArgument("r_estimate must lie in (0, 1)");
  }
}

std::vector<Eigen::Vector3d> GroundTruth::positions(LandmarkKind kind) const {
  std::vector<Eigen::Vector3d> out;
  for (const auto& l : landmarks) {
    if (l.kind == kind) {
      out.push_back(l.position);
    }
  }
  return out;
}

GroundTruth generate_scenario(const ScenarioConfig& config) {
  config.validate();
  const TrajectoryConfig& tr = config.trajectory;
  GroundTruth truth;
  truth.ue_states.reserve(static_cast<std::size_t>(tr.steps) + 1);
  Vector s = tr.initial.to_vector();
  truth.ue_states.push_back(tr.initial);
  for (int k = 1; k <= tr.steps; ++k) {
    s = constant_turn_transition(s, tr.speed, tr.turn_rate, tr.step_duration);
    truth.ue_states.push_back(UEState::from_vector(s));
  }
  for (const auto& plane : config.va_planes) {
    truth.landmarks.push_back({mirror_point(config.bs_position, plane), LandmarkKind::VA});
  }
  for (const auto& sp : config.sp_positions) {
    truth.landmarks.push_back({sp, LandmarkKind::SP});
  }
  return truth;
}

std::vector<Measurement> simulate_measurements(const GroundTruth& truth, int k, const GeometryModel& model,
                                               const SensorModel& sensor, std::mt19937_64& rng) {
  if (k < 1 || static_cast<std::size_t>(k) >= truth.ue_states.size()) {
    throw IndexOutOfRange("simulate_measurements: step " + std::to_string(k) + " outside the trajectory");
  }
  const UEState& ue = truth.ue_states[static_cast<std::size_t>(k)];
  std::bernoulli_distribution detect(sensor.detection_prob);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix noise_l = cholesky_factor(sensor.noise_cov);

  std::vector<Measurement> out;
  auto emit = [&](const Landmark& lm) {
    if (!in_fov(lm, ue, sensor) || !detect(rng)) {
      return;
    }
    Vector e(kMeasDim);
    for (Eigen::Index i = 0; i < kMeasDim; ++i) {
      e[i] = normal(rng);
    }
    Vector z = model.measure(lm, ue).to_vector() + noise_l * e;
    wrap_circular(z, model.circular_mask());
    out.push_back(Measurement::from_vector(z));
  };
  emit(Landmark{model.bs_position(), LandmarkKind::BS});
  for (const auto& lm : truth.landmarks) {
    emit(lm);
  }

  std::poisson_distribution<int> clutter_count(sensor.clutter_rate);
  std::uniform_real_distribution<double> toa(0.0, sensor.toa_max);
  std::uniform_real_distribution<double> az(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> el(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  const int n_clutter = sensor.clutter_rate > 0.0 ? clutter_count(rng) : 0;
  for (int i = 0; i < n_clutter; ++i) {
    Measurement c;
    c.toa = toa(rng);
    c.aoa = {az(rng), el(rng)};
    c.aod = {az(rng), el(rng)};
    out.push_back(c);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace iplpmb
