#pragma once

#include "iplpmb/gaussian.hpp"
#include "iplpmb/model_function.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace iplpmb {

enum class LandmarkKind { BS, VA, SP };

[[nodiscard]] std::string_view to_string(LandmarkKind kind) noexcept;

/// Dimensions of the UE state [x, y, z, heading, clock_bias] and of one measurement
/// [toa, aoa_az, aoa_el, aod_az, aod_el].
inline constexpr Eigen::Index kUeDim = 5;
inline constexpr Eigen::Index kLandmarkDim = 3;
inline constexpr Eigen::Index kMeasDim = 5;
inline constexpr Eigen::Index kHeadingIndex = 3;
inline constexpr Eigen::Index kBiasIndex = 4;

struct UEState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double heading = 0.0;     // rad, rotation about +z
  double clock_bias = 0.0;  // m

  [[nodiscard]] Vector to_vector() const;
  [[nodiscard]] static UEState from_vector(const Vector& s);
};

struct Landmark {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  LandmarkKind kind = LandmarkKind::VA;
};

/// One path: delay as path length (m), arrival and departure (azimuth, elevation).
struct Measurement {
  double toa = 0.0;
  Eigen::Vector2d aoa = Eigen::Vector2d::Zero();
  Eigen::Vector2d aod = Eigen::Vector2d::Zero();

  [[nodiscard]] Vector to_vector() const;
  [[nodiscard]] static Measurement from_vector(const Vector& z);
};

/// Detection, field-of-view and clutter parameters.
struct SensorModel {
  double detection_prob = 0.9;
  double fov_radius_sp = 50.0;
  double clutter_rate = 1.0;
  double toa_max = 100.0;
  Matrix noise_cov = default_noise_cov();

  /// [0, toa_max] x (2 pi x pi)^2
  [[nodiscard]] double measurement_volume() const noexcept;
  [[nodiscard]] double clutter_density() const noexcept;

  [[nodiscard]] static Matrix default_noise_cov();
};

/// Unit direction from (azimuth, elevation).
[[nodiscard]] Eigen::Vector3d unit_direction(double azimuth, double elevation) noexcept;
/// (azimuth, elevation) of a direction vector. Throws DegenerateGeometry on zero length.
[[nodiscard]] Eigen::Vector2d direction_angles(const Eigen::Vector3d& v);

/// Measurement model interface used by the filter.
///
/// `ue` is the 5-dim UE state vector. For BS paths the landmark argument is ignored.
/// Implementations are immutable and thread-safe.
class MeasurementModel {
 public:
  virtual ~MeasurementModel() = default;

  [[nodiscard]] virtual Vector predict(const Vector& ue, const Eigen::Vector3d& landmark,
                                       LandmarkKind kind) const = 0;
  [[nodiscard]] virtual Eigen::Vector3d invert(const Vector& z, const Vector& ue,
                                               LandmarkKind kind) const = 0;
  [[nodiscard]] virtual const CircularMask& circular_mask() const noexcept = 0;
  [[nodiscard]] virtual bool in_fov(const Eigen::Vector3d& landmark, LandmarkKind kind,
                                    const Vector& ue, const SensorModel& sensor) const;
};

/// Single-bounce mmWave downlink geometry around one known BS.
///
/// The BS frame is the global frame; the UE frame is the global frame rotated by the
/// heading about +z. A VA is the BS mirrored across its reflecting plane.
class GeometryModel final : public MeasurementModel {
 public:
  explicit GeometryModel(Eigen::Vector3d bs_position);

  [[nodiscard]] const Eigen::Vector3d& bs_position() const noexcept { return bs_; }

  [[nodiscard]] Measurement measure(const Landmark& landmark, const UEState& ue) const;
  [[nodiscard]] Eigen::Vector3d invert_measurement(const Measurement& z, const UEState& ue,
                                                   LandmarkKind kind) const;
  /// Reflection point of the VA path on the mirror plane.
  [[nodiscard]] Eigen::Vector3d incidence_point(const Eigen::Vector3d& va,
                                                const Eigen::Vector3d& ue_position) const;

  [[nodiscard]] Vector predict(const Vector& ue, const Eigen::Vector3d& landmark,
                               LandmarkKind kind) const override;
  [[nodiscard]] Eigen::Vector3d invert(const Vector& z, const Vector& ue,
                                       LandmarkKind kind) const override;
  [[nodiscard]] const CircularMask& circular_mask() const noexcept override { return mask_; }

 private:
  Eigen::Vector3d bs_;
  CircularMask mask_;
};

/// BS and VA always true; SP true iff within fov_radius_sp of the UE.
[[nodiscard]] bool in_fov(const Landmark& landmark, const UEState& ue, const SensorModel& sensor);

/// h(s) on the joint layout [UE(5) | landmark_1(3) | ...]. BS entries take no state
/// slice. Output is the concatenation of per-entry 5-dim predictions. The returned
/// function refers to `model`, which must outlive it.
[[nodiscard]] ModelFunction stacked_measurement_fn(const MeasurementModel& model,
                                                   std::vector<LandmarkKind> kinds);

[[nodiscard]] Eigen::Index stacked_state_dim(std::span<const LandmarkKind> kinds) noexcept;

}  // namespace iplpmb
