#pragma once

#include "iplpmb/geometry.hpp"
#include "iplpmb/metrics.hpp"
#include "iplpmb/pmb_map.hpp"
#include "iplpmb/slam_filter.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace iplpmb {

/// Plane {x : normal . x = offset}. The normal need not be unit length.
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitX();
  double offset = 0.0;
};

/// Mirror image of a point across a plane. Throws DegeneratePlane for a zero normal.
[[nodiscard]] Eigen::Vector3d mirror_point(const Eigen::Vector3d& p, const Plane& plane);

struct TrajectoryConfig {
  double speed = 22.22;                         // m/s
  double turn_rate = 3.141592653589793 / 10.0;  // rad/s, positive = counterclockwise
  UEState initial{Eigen::Vector3d(70.7285, 0.0, 0.0), 3.141592653589793 / 2.0, 300.0};
  int steps = 40;
  double step_duration = 0.5;  // s
};

/// Radio parameters of the experiment. Recorded in outputs only; they do not enter
/// the simulation.
struct RadioMetadata {
  double carrier_ghz = 28.0;
  double bandwidth_mhz = 200.0;
  int antennas_tx = 64;
  int antennas_rx = 64;
  int subcarriers = 64;
  int symbols = 16;
};

struct ScenarioConfig {
  Eigen::Vector3d bs_position{0.0, 0.0, 40.0};
  std::vector<Plane> va_planes;                  // one VA per plane
  std::vector<Eigen::Vector3d> sp_positions;
  TrajectoryConfig trajectory;
  SensorModel sensor;
  Matrix process_noise = default_process_noise();  // Q of the filter's motion model
  std::uint64_t seed = 1;
  RadioMetadata radio;

  /// Four walls at x = +-100 and y = +-100, four scatterers at (+-65, +-65, 10), and a
  /// UE circling the BS at about 70.7 m so that 40 steps close the circle.
  [[nodiscard]] static ScenarioConfig make_default();
  [[nodiscard]] static Matrix default_process_noise();
  /// Throws InvalidArgument / DegeneratePlane on inconsistent values.
  void validate() const;
};

/// Filter and evaluation settings that sit next to the scenario.
struct ExperimentConfig {
  ScenarioConfig scenario = ScenarioConfig::make_default();
  FilterConfig filter;
  PppIntensity ppp = default_ppp();
  /// Standard deviations of the initial UE prior [x, y, z, heading, bias]; the prior
  /// mean of each run is drawn from N(truth, diag(std^2)).
  Vector initial_std = default_initial_std();
  GospaConfig gospa;
  double r_estimate = 0.5;

  [[nodiscard]] static PppIntensity default_ppp();
  [[nodiscard]] static Vector default_initial_std();
  void validate() const;
};

struct GroundTruth {
  std::vector<UEState> ue_states;  // steps + 1 states, index 0 is the initial pose
  std::vector<Landmark> landmarks;

  [[nodiscard]] std::vector<Eigen::Vector3d> positions(LandmarkKind kind) const;
};

/// Noiseless constant-turn trajectory and static landmarks (VAs mirrored from the BS).
[[nodiscard]] GroundTruth generate_scenario(const ScenarioConfig& config);

/// Measurement set at step k (1-based, k <= steps): detections of in-view landmarks
/// and the BS with noise, plus Poisson clutter uniform over the measurement space,
/// in random order.
[[nodiscard]] std::vector<Measurement> simulate_measurements(const GroundTruth& truth, int k,
                                                             const GeometryModel& model,
                                                             const SensorModel& sensor,
                                                             std::mt19937_64& rng);

/// Independent generator for one (seed, stream) pair.
[[nodiscard]] std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace iplpmb
