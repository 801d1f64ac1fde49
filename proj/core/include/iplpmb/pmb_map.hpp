#pragma once

#include "iplpmb/gaussian.hpp"
#include "iplpmb/geometry.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace iplpmb {

/// Landmark kinds carried by the map; the BS is known and lives outside it.
inline constexpr std::array<LandmarkKind, 2> kMapKinds{LandmarkKind::VA, LandmarkKind::SP};
inline constexpr std::size_t kNumMapKinds = kMapKinds.size();

/// Index of a map kind in the per-kind arrays. Throws UnsupportedKind for BS.
[[nodiscard]] std::size_t kind_index(LandmarkKind kind);

using KindArray = std::array<double, kNumMapKinds>;

/// Uniform Poisson intensity of never-detected landmarks over a box, per kind.
struct PppIntensity {
  Eigen::AlignedBox3d region{Eigen::Vector3d(-100, -100, -20), Eigen::Vector3d(100, 100, 40)};
  KindArray rate_per_kind{4.0, 4.0};

  [[nodiscard]] double volume() const noexcept { return region.volume(); }
  /// rate / volume inside the region, 0 outside.
  [[nodiscard]] double intensity(LandmarkKind kind, const Eigen::Vector3d& x) const;
};

/// A potentially detected landmark: exists with probability `existence` and, given
/// existence, is of kind k with probability kind_weights[k] at kind_densities[k].
struct BernoulliComponent {
  std::uint64_t id = 0;
  double existence = 0.0;
  KindArray kind_weights{0.0, 0.0};
  std::array<std::optional<GaussianDensity>, kNumMapKinds> kind_densities;

  /// Kind with the largest weight (ties resolve to VA).
  [[nodiscard]] LandmarkKind map_kind() const;
  [[nodiscard]] const GaussianDensity& density(LandmarkKind kind) const;
};

struct PmbMap {
  PppIntensity ppp;
  std::vector<BernoulliComponent> bernoullis;
  std::uint64_t next_id = 1;
};

/// Association target of one measurement within a global hypothesis.
struct AssociationTarget {
  enum class Type { Bs, Bernoulli, NewOrClutter };
  Type type = Type::NewOrClutter;
  std::size_t index = 0;  // Bernoulli position in the map, when type == Bernoulli

  friend bool operator==(const AssociationTarget&, const AssociationTarget&) = default;
};

struct GlobalHypothesis {
  double weight = 0.0;
  std::vector<AssociationTarget> assignment;  // one per measurement
  std::vector<bool> detected_flags;           // one per map Bernoulli
};

/// The Bernoulli set of one global hypothesis after its update.
struct HypothesisMap {
  double weight = 0.0;
  std::vector<BernoulliComponent> bernoullis;
};

/// Landmarks are static: the map prediction is the identity.
[[nodiscard]] PmbMap predict_map(const PmbMap& map);

struct BirthResult {
  std::optional<BernoulliComponent> bernoulli;  // empty when no kind has birth mass
  double likelihood = 0.0;                      // sum over kinds of lambda p_D integral N(z; h(x,s), R)
  double weight = 0.0;                          // c(z) + likelihood
  KindArray kind_likelihood{0.0, 0.0};
};

/// New Bernoulli from a measurement not explained by an existing landmark.
///
/// Per kind, the position density is the SLR of the inverse measurement map over
/// N(z, R) x N(ue prior). The birth likelihood integrates the uniform PPP intensity
/// against the measurement likelihood linearized around that density. The result has
/// r = L / (c(z) + L) and kind weights proportional to the per-kind likelihoods.
[[nodiscard]] BirthResult birth_bernoulli(const Measurement& z, const GaussianDensity& ue_prior,
                                          const PppIntensity& ppp, const SensorModel& sensor,
                                          const MeasurementModel& model, std::uint64_t id);

struct MisdetectionResult {
  BernoulliComponent bernoulli;
  double weight = 1.0;  // 1 - r p_D
};

/// r' = r (1 - p_d) / (1 - r p_d); densities unchanged.
[[nodiscard]] MisdetectionResult misdetection_update(const BernoulliComponent& b, double p_detect);

/// Kind-aware miss: kind weights are also reweighted by (1 - p_D,k).
[[nodiscard]] MisdetectionResult misdetection_update(const BernoulliComponent& b,
                                                     const KindArray& p_detect_per_kind);

/// Collapses a weighted set of hypotheses into one PMB by marginalizing over them.
///
/// Bernoullis are matched by id; an id absent from a hypothesis has r = 0 there. Output
/// Bernoullis are ordered by first appearance. Weights must sum to 1.
[[nodiscard]] PmbMap pmbm_to_pmb(const PppIntensity& ppp, std::span<const HypothesisMap> hypotheses,
                                 std::uint64_t next_id);

struct PruneOptions {
  double r_min = 1e-3;
  double kind_w_min = 1e-3;
  double merge_dist = 3.0;  // Mahalanobis
};

/// Drops low-existence Bernoullis and low-weight kinds, then merges same-kind
/// Bernoullis whose MAP-kind means are within merge_dist Mahalanobis distance.
[[nodiscard]] PmbMap prune(const PmbMap& map, const PruneOptions& opts);

}  // namespace iplpmb
