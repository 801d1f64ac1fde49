#include "iplpmb/geometry.hpp"

#include "iplpmb/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace iplpmb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinLength = 1e-12;

// Global direction -> UE body frame.
Eigen::Vector3d to_ue_frame(const Eigen::Vector3d& v, double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y(), v.z()};
}

Eigen::Vector3d from_ue_frame(const Eigen::Vector3d& v, double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
}

}  // namespace

double wrap_angle(double a) noexcept {
  if (a > -kPi && a <= kPi) {
    return a;
  }
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) {
    r += 2.0 * kPi;
  }
  return r;
}

void wrap_circular(Vector& v, const CircularMask& mask) {
  const auto n = std::min<Eigen::Index>(v.size(), static_cast<Eigen::Index>(mask.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      v[i] = wrap_angle(v[i]);
    }
  }
}

std::string_view to_string(LandmarkKind kind) noexcept {
  switch (kind) {
    case LandmarkKind::BS: return "BS";
    case LandmarkKind::VA: return "VA";
    case LandmarkKind::SP: return "SP";
  }
  return "?";
}

Vector UEState::to_vector() const {
  Vector s(kUeDim);
  s << position, heading, clock_bias;
  return s;
}

UEState UEState::from_vector(const Vector& s) {
  if (s.size() < kUeDim) {
    throw DimensionMismatch("UEState::from_vector: expected 5 components, got " +
                            std::to_string(s.size()));
  }
  return {s.head<3>(), s[kHeadingIndex], s[kBiasIndex]};
}

Vector Measurement::to_vector() const {
  Vector z(kMeasDim);
  z << toa, aoa, aod;
  return z;
}

Measurement Measurement::from_vector(const Vector& z) {
  if (z.size() != kMeasDim) {
    throw DimensionMismatch("Measurement::from_vector: expected 5 components, got " +
                            std::to_string(z.size()));
  }
  return {z[0], z.segment<2>(1), z.segment<2>(3)};
}

double SensorModel::measurement_volume() const noexcept {
  const double angles = 2.0 * kPi * kPi;
  return toa_max * angles * angles;
}

double SensorModel::clutter_density() const noexcept {
  return clutter_rate / measurement_volume();
}

Matrix SensorModel::default_noise_cov() {
  Vector sd(kMeasDim);
  sd << 0.1, 0.01, 0.01, 0.01, 0.01;
  return sd.array().square().matrix().asDiagonal();
}

Eigen::Vector3d unit_direction(double azimuth, double elevation) noexcept {
  const double ce = std::cos(elevation);
  return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

Eigen::Vector2d direction_angles(const Eigen::Vector3d& v) {
  const double horizontal = std::hypot(v.x(), v.y());
  if (horizontal < kMinLength && std::abs(v.z()) < kMinLength) {
    throw DegenerateGeometry("direction_angles: zero-length direction");
  }
  return {wrap_angle(std::atan2(v.y(), v.x())), std::atan2(v.z(), horizontal)};
}

bool MeasurementModel::in_fov(const Eigen::Vector3d& landmark, LandmarkKind kind, const Vector& ue,
                              const SensorModel& sensor) const {
  if (kind != LandmarkKind::SP) {
    return true;
  }
  return (landmark - ue.head<3>()).norm() <= sensor.fov_radius_sp;
}

GeometryModel::GeometryModel(Eigen::Vector3d bs_position)
    : bs_(std::move(bs_position)), mask_{false, true, false, true, false} {}

Eigen::Vector3d GeometryModel::incidence_point(const Eigen::Vector3d& va,
                                               const Eigen::Vector3d& ue_position) const {
  const Eigen::Vector3d axis = va - bs_;
  const double len = axis.norm();
  if (len < kMinLength) {
    throw DegenerateGeometry("incidence_point: VA coincides with the BS");
  }
  const Eigen::Vector3d normal = axis / len;
  const Eigen::Vector3d mid = 0.5 * (bs_ + va);
  const Eigen::Vector3d ray = va - ue_position;
  const double denom = normal.dot(ray);
  if (std::abs(denom) < kMinLength) {
    throw DegenerateGeometry("incidence_point: UE-VA segment parallel to the mirror plane");
  }
  const double t = normal.dot(mid - ue_position) / denom;
  return ue_position + t * ray;
}

Measurement GeometryModel::measure(const Landmark& landmark, const UEState& ue) const {
  const Eigen::Vector3d& p = ue.position;
  Measurement z;
  switch (landmark.kind) {
    case LandmarkKind::BS: {
      const Eigen::Vector3d d = p - bs_;
      z.toa = d.norm() + ue.clock_bias;
      z.aod = direction_angles(d);
      z.aoa = direction_angles(to_ue_frame(-d, ue.heading));
      break;
    }
    case LandmarkKind::VA: {
      const Eigen::Vector3d& va = landmark.position;
      const Eigen::Vector3d q = incidence_point(va, p);
      z.toa = (va - p).norm() + ue.clock_bias;
      z.aoa = direction_angles(to_ue_frame(q - p, ue.heading));
      z.aod = direction_angles(q - bs_);
      break;
    }
    case LandmarkKind::SP: {
      const Eigen::Vector3d& sp = landmark.position;
      z.toa = (sp - bs_).norm() + (p - sp).norm() + ue.clock_bias;
      z.aod = direction_angles(sp - bs_);
      z.aoa = direction_angles(to_ue_frame(sp - p, ue.heading));
      break;
    }
  }
  return z;
}

Eigen::Vector3d GeometryModel::invert_measurement(const Measurement& z, const UEState& ue,
                                                  LandmarkKind kind) const {
  const double path = z.toa - ue.clock_bias;
  if (!(path > 0.0)) {
    throw NoPhysicalSolution("invert_measurement: non-positive path length " + std::to_string(path));
  }
  const Eigen::Vector3d u = from_ue_frame(unit_direction(z.aoa[0], z.aoa[1]), ue.heading);
  switch (kind) {
    case LandmarkKind::VA:
      return ue.position + path * u;
    case LandmarkKind::SP: {
      // |w + d2 u| = path - d2  =>  d2 = (path^2 - |w|^2) / (2 (w.u + path))
      const Eigen::Vector3d w = ue.position - bs_;
      const double num = path * path - w.squaredNorm();
      const double den = 2.0 * (w.dot(u) + path);
      if (!(num > 0.0) || !(den > 0.0)) {
        throw NoPhysicalSolution("invert_measurement: path shorter than the line of sight");
      }
      return ue.position + (num / den) * u;
    }
    case LandmarkKind::BS:
      break;
  }
  throw UnsupportedKind("invert_measurement: the BS position is known, not inverted");
}

Vector GeometryModel::predict(const Vector& ue, const Eigen::Vector3d& landmark, LandmarkKind kind) const {
  return measure(Landmark{landmark, kind}, UEState::from_vector(ue)).to_vector();
}

Eigen::Vector3d GeometryModel::invert(const Vector& z, const Vector& ue, LandmarkKind kind) const {
  return invert_measurement(Measurement::from_vector(z), UEState::from_vector(ue), kind);
}

bool in_fov(const Landmark& landmark, const UEState& ue, const SensorModel& sensor) {
  if (landmark.kind != LandmarkKind::SP) {
    return true;
  }
  return (landmark.position - ue.position).norm() <= sensor.fov_radius_sp;
}

Eigen::Index stacked_state_dim(std::span<const LandmarkKind> kinds) noexcept {
  Eigen::Index d = kUeDim;
  for (auto k : kinds) {
    if (k != LandmarkKind::BS) {
      d += kLandmarkDim;
    }
  }
  return d;
}

ModelFunction stacked_measurement_fn(const MeasurementModel& model, std::vector<LandmarkKind> kinds) {
  const Eigen::Index state_dim = stacked_state_dim(kinds);
  CircularMask mask;
  mask.reserve(kinds.size() * kMeasDim);
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    mask.insert(mask.end(), model.circular_mask().begin(), model.circular_mask().end());
  }
  const MeasurementModel* m = &model;
  auto fn = [m, kinds = std::move(kinds), state_dim](const Vector& s) -> Vector {
    if (s.size() != state_dim) {
      throw DimensionMismatch("stacked measurement: state has dimension " + std::to_string(s.size()) +
                              ", expected " + std::to_string(state_dim));
    }
    const Vector ue = s.head(kUeDim);
    Vector z(static_cast<Eigen::Index>(kinds.size()) * kMeasDim);
    Eigen::Index at = kUeDim;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      Eigen::Vector3d lm = Eigen::Vector3d::Zero();
      if (kinds[i] != LandmarkKind::BS) {
        lm = s.segment<3>(at);
        at += kLandmarkDim;
      }
      z.segment(static_cast<Eigen::Index>(i) * kMeasDim, kMeasDim) = m->predict(ue, lm, kinds[i]);
    }
    return z;
  };
  return {std::move(fn), std::move(mask)};
}

}  // namespace iplpmb
