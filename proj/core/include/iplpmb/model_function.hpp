#pragma once

#include "iplpmb/gaussian.hpp"

#include <functional>
#include <vector>

namespace iplpmb {

/// Per-component flag: true where the value is an angle living on (-pi, pi].
using CircularMask = std::vector<bool>;

/// Wraps an angle to (-pi, pi]. Values already in range are returned unchanged.
[[nodiscard]] double wrap_angle(double a) noexcept;

/// Wraps the flagged components of v in place.
void wrap_circular(Vector& v, const CircularMask& mask);

/// A vector-valued function together with the circular flags of its output.
///
/// The callable must be safe to invoke concurrently from several threads.
struct ModelFunction {
  std::function<Vector(const Vector&)> fn;
  CircularMask circular;

  [[nodiscard]] Vector operator()(const Vector& x) const { return fn(x); }
  [[nodiscard]] Eigen::Index output_dim() const noexcept {
    return static_cast<Eigen::Index>(circular.size());
  }
};

}  // namespace iplpmb
