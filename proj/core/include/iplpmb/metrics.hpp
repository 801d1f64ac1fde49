#pragma once

#include "iplpmb/gaussian.hpp"
#include "iplpmb/geometry.hpp"
#include "iplpmb/pmb_map.hpp"

#include <span>
#include <vector>

namespace iplpmb {

struct GospaConfig {
  double cutoff = 20.0;  // m
  double p = 2.0;
  double alpha = 2.0;

  /// Throws InvalidArgument unless c > 0, p >= 1 and 0 < alpha <= 2.
  void validate() const;
};

/// GOSPA distance and its parts, all in meters. total^p is the sum of the p-th
/// powers of the three parts.
struct GospaResult {
  double total = 0.0;
  double localization = 0.0;
  double missed = 0.0;
  double false_targets = 0.0;
  std::size_t num_matched = 0;
  std::size_t num_missed = 0;
  std::size_t num_false = 0;
};

/// Pairs at distance >= cutoff are never matched.
[[nodiscard]] GospaResult gospa(std::span<const Eigen::Vector3d> truth, std::span<const Eigen::Vector3d> estimate,
                                const GospaConfig& cfg = {});

struct MapEstimate {
  std::vector<Eigen::Vector3d> va;
  std::vector<Eigen::Vector3d> sp;
};

/// Mean of the MAP kind of every Bernoulli with r >= r_threshold.
[[nodiscard]] MapEstimate extract_map_estimate(const PmbMap& map, double r_threshold = 0.5);

/// Signed heading residual in degrees, wrapped to (-180, 180].
[[nodiscard]] double heading_error_deg(double estimate, double truth);

/// UE estimate at one step: mean and per-component standard deviations of the filter.
struct UeEstimate {
  Vector mean;  // [x, y, z, heading, bias]
  Vector std;

  [[nodiscard]] static UeEstimate from_density(const GaussianDensity& ue);
  /// sqrt(var_x + var_y)
  [[nodiscard]] double position_std() const;
};

struct UeErrorSummary {
  double position_rmse = 0.0;  // m, over (x, y)
  double heading_rmse_deg = 0.0;
  double bias_rmse = 0.0;  // m
  // Time- and run-averaged standard deviations reported by the filter.
  double position_std = 0.0;
  double heading_std_deg = 0.0;
  double bias_std = 0.0;
  // Standard deviations of the errors across runs, averaged over time.
  double position_std_empirical = 0.0;
  double heading_std_empirical_deg = 0.0;
  double bias_std_empirical = 0.0;
};

/// estimates[run][t] is compared with truth[t]. Throws LengthMismatch when a run does
/// not have one estimate per truth state.
[[nodiscard]] UeErrorSummary ue_error_summary(const std::vector<std::vector<UeEstimate>>& estimates,
                                              std::span<const UEState> truth);

}  // namespace iplpmb
