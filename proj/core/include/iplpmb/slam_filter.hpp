#pragma once

#include "iplpmb/assignment.hpp"
#include "iplpmb/gaussian.hpp"
#include "iplpmb/geometry.hpp"
#include "iplpmb/linearization.hpp"
#include "iplpmb/pmb_map.hpp"

#include <memory>
#include <span>
#include <vector>

namespace iplpmb {

/// How the joint measurement function is linearized in each hypothesis update.
enum class Linearizer {
  Prior,      // EK-PMB: Taylor expansion at the prior mean
  Posterior,  // IPL-PMB: iterated SLR w.r.t. the posterior
};

/// s_k = v(s_{k-1}) + q, q ~ N(0, Q).
struct MotionModel {
  ModelFunction transition;
  Matrix process_noise;
};

/// Planar constant turn rate with known speed: z fixed, heading advances by
/// turn_rate * dt, clock bias is a random walk driven by Q.
[[nodiscard]] Vector constant_turn_transition(const Vector& s, double speed, double turn_rate, double dt);
[[nodiscard]] MotionModel constant_turn_motion(double speed, double turn_rate, double dt, Matrix q);

struct FilterConfig {
  int gamma = 10;
  Linearizer linearizer = Linearizer::Posterior;
  IplfOptions iplf;
  PruneOptions prune;
  double gate = 40.0;  // squared Mahalanobis distance of the innovation
  /// Records the smallest eigenvalue of P- - P+ over every joint update. The extra
  /// eigen-decompositions count towards the reported update time.
  bool check_contraction = false;
};

struct FilterState {
  GaussianDensity ue;  // [x, y, z, heading, bias]
  PmbMap map;
  int step = 0;
};

/// Chapman-Kolmogorov prediction of the UE state by cubature SLR of the transition.
[[nodiscard]] GaussianDensity predict_ue(const GaussianDensity& ue, const MotionModel& motion);

/// Column layout: [BS | Bernoulli 0..n-1 | new-or-clutter for measurement 0..m-1].
/// Entries are negative log likelihood ratios against the missed-detection factors, so
/// that log w(hypothesis) = -cost(hypothesis) + log_miss_constant.
struct AssociationProblem {
  CostMatrix cost;
  GaussianDensity ue_prior;
  double log_miss_constant = 0.0;
  std::vector<KindArray> p_detect;  // per Bernoulli, per kind
  /// log(p_D,k * N(z_j; predicted_ik, S_ik)) per measurement, Bernoulli and kind;
  /// -inf when gated or unavailable.
  std::vector<std::vector<KindArray>> kind_loglik;
  std::vector<BirthResult> births;  // per measurement
  std::uint64_t first_new_id = 0;

  [[nodiscard]] std::size_t num_bernoullis() const noexcept { return p_detect.size(); }
  [[nodiscard]] static constexpr Eigen::Index bs_column() noexcept { return 0; }
  [[nodiscard]] Eigen::Index bernoulli_column(std::size_t i) const noexcept {
    return 1 + static_cast<Eigen::Index>(i);
  }
  [[nodiscard]] Eigen::Index new_column(std::size_t j) const noexcept {
    return 1 + static_cast<Eigen::Index>(num_bernoullis() + j);
  }
  [[nodiscard]] AssociationTarget target_of(Eigen::Index column) const;
};

struct HypothesisUpdate {
  double log_weight = 0.0;
  GaussianDensity ue;
  GaussianDensity joint;  // stacked [UE | detected landmarks], the UE prior when nothing is detected
  HypothesisMap map;
  int iterations = 0;     // 0 when the hypothesis detects nothing
  double min_contraction_eig = 0.0;
};

struct StepDiagnostics {
  double predict_ms = 0.0;
  double update_ms = 0.0;
  double mean_iterations = 0.0;  // over hypotheses with at least one detection; 0 if none
  std::size_t hypotheses = 0;
  std::size_t dropped_hypotheses = 0;
  std::vector<double> weights;
  double min_contraction_eig = 0.0;
};

struct StepResult {
  FilterState state;
  StepDiagnostics diagnostics;
};

/// PMB SLAM filter with prior (EK) or posterior (IPL) linearization.
class PmbSlamFilter {
 public:
  PmbSlamFilter(std::shared_ptr<const MeasurementModel> model, SensorModel sensor, MotionModel motion,
                FilterConfig config);

  [[nodiscard]] const FilterConfig& config() const noexcept { return config_; }
  [[nodiscard]] const SensorModel& sensor() const noexcept { return sensor_; }
  [[nodiscard]] const MeasurementModel& model() const noexcept { return *model_; }

  [[nodiscard]] AssociationProblem build_cost_matrix(const GaussianDensity& ue_prior, const PmbMap& map,
                                                     std::span<const Measurement> z) const;

  [[nodiscard]] GlobalHypothesis to_hypothesis(const AssociationProblem& problem,
                                               const Assignment& assignment) const;

  /// Joint update of the UE and every detected landmark under one association.
  [[nodiscard]] HypothesisUpdate update_hypothesis(const AssociationProblem& problem, const PmbMap& map,
                                                   std::span<const Measurement> z,
                                                   const GlobalHypothesis& hypothesis) const;

  /// predict -> cost matrix -> k-best -> per-hypothesis update -> fusion -> PMB -> prune.
  /// Throws NoFeasibleHypothesis if every hypothesis update fails.
  [[nodiscard]] StepResult step(const FilterState& state, std::span<const Measurement> z) const;

 private:
  [[nodiscard]] GaussianDensity linearized_update(const ModelFunction& fn, const GaussianDensity& prior,
                                                  const Vector& z, const Matrix& r, int& iterations) const;

  std::shared_ptr<const MeasurementModel> model_;
  SensorModel sensor_;
  MotionModel motion_;
  FilterConfig config_;
};

/// Moment-matched UE density over hypotheses, headings unwrapped against the first.
[[nodiscard]] GaussianDensity fuse_ue(std::span<const double> weights, std::span<const GaussianDensity> ues);

}  // namespace iplpmb
