#pragma once

#include "iplpmb/gaussian.hpp"
#include "iplpmb/model_function.hpp"

#include <utility>

namespace iplpmb {

/// h(s) ~ H s + b + e, e ~ N(0, omega).
struct AffineApprox {
  Matrix H;
  Vector b;
  Matrix omega;
};

/// Cubature moments of the propagated points.
struct SlrStatistics {
  Vector z_pred;  // mean of h over the density
  Matrix s_zz;    // covariance of h
  Matrix s_sz;    // cross-covariance state / h
};

struct IplfOptions {
  int max_iterations = 10;
  double kl_threshold = 1e-4;  // symmetric KL between successive posteriors
};

struct IplfResult {
  GaussianDensity posterior;
  int iterations = 0;
  bool converged = false;
};

/// Third-degree spherical-radial cubature points, one per column (2d columns,
/// equal weights 1/(2d)): m +- sqrt(d) * G e_i with P = G G^T.
[[nodiscard]] Matrix cubature_points(const GaussianDensity& density);

/// Statistical linear regression of fn w.r.t. density using cubature points.
///
/// Circular outputs are unwrapped against the first propagated point before the
/// moments are taken; z_pred is wrapped back into (-pi, pi]. Omega is PSD-repaired.
/// Any error thrown by fn is rethrown as FunctionEvaluationFailure.
[[nodiscard]] std::pair<AffineApprox, SlrStatistics> slr(const ModelFunction& fn,
                                                         const GaussianDensity& density);

/// First-order Taylor linearization at the mean (central differences, step
/// 1e-6 * max(1, |m_i|)), omega = 0.
[[nodiscard]] AffineApprox ekf_linearize(const ModelFunction& fn, const GaussianDensity& density);

/// Kalman update of `prior` with z ~ N(H s + b, omega + R). Residual components
/// flagged in `circular` are wrapped. The posterior covariance is symmetrized and
/// PSD-repaired. Throws SingularInnovation if H P H^T + omega + R is not invertible.
[[nodiscard]] GaussianDensity kf_update(const GaussianDensity& prior, const AffineApprox& approx,
                                        const Vector& z, const Matrix& r,
                                        const CircularMask& circular);

/// Log-likelihood of z under the linearized predictive N(H m + b, H P H^T + omega + R).
[[nodiscard]] double predictive_log_likelihood(const GaussianDensity& prior, const AffineApprox& approx,
                                               const Vector& z, const Matrix& r,
                                               const CircularMask& circular);

/// Iterated posterior linearization filter.
///
/// Iteration i re-linearizes fn by SLR w.r.t. the current posterior approximation
/// (the prior on the first pass) and updates the original prior with it. When the
/// symmetric KL between posterior i and posterior i-1 drops below the threshold the
/// fixed point was already reached at i-1: that posterior is returned together with
/// `iterations = i - 1`, so an affine fn reports exactly one iteration. If the cap is
/// hit first, the last posterior is returned with `converged = false`.
[[nodiscard]] IplfResult iplf(const ModelFunction& fn, const GaussianDensity& prior, const Vector& z,
                              const Matrix& r, const IplfOptions& opts = {});

/// Prior-linearized (EKF) update: ekf_linearize at the prior mean, then kf_update.
[[nodiscard]] GaussianDensity ekf_update(const ModelFunction& fn, const GaussianDensity& prior,
                                         const Vector& z, const Matrix& r);

}  // namespace iplpmb
