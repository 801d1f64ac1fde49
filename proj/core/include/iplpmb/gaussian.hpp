#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace iplpmb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Multivariate Gaussian N(mean, cov).
///
/// Construction checks shapes and finiteness and symmetrizes the covariance.
/// Positive semidefiniteness is maintained by the operations that produce
/// densities (see ensure_psd); use is_psd() to check it explicitly.
class GaussianDensity {
 public:
  GaussianDensity() = default;
  GaussianDensity(Vector mean, Matrix cov);

  [[nodiscard]] const Vector& mean() const noexcept { return mean_; }
  [[nodiscard]] const Matrix& cov() const noexcept { return cov_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return mean_.size(); }

  /// Smallest eigenvalue >= -tol * max(trace, 1).
  [[nodiscard]] bool is_psd(double tol = 1e-9) const;

 private:
  Vector mean_;
  Matrix cov_;
};

/// Lower-triangular G with G * G^T = P.
///
/// Tries a plain Cholesky first. If that fails the matrix is PSD-repaired and
/// factored with a semidefinite Cholesky that zeroes negligible pivots, so
/// rank-deficient covariances (e.g. a deterministic state) still factor.
/// Throws NotPositiveDefinite when a pivot is negative beyond round-off.
[[nodiscard]] Matrix cholesky_factor(const Matrix& p);

/// Symmetric matrix whose eigenvalues are all >= floor.
/// Returns the input bit-for-bit when it already satisfies the floor.
[[nodiscard]] Matrix ensure_psd(const Matrix& m, double floor = 0.0);

/// Sub-density over indices [start, start + count).
[[nodiscard]] GaussianDensity marginalize(const GaussianDensity& joint, Eigen::Index start,
                                          Eigen::Index count);

/// Single Gaussian with the first two moments of the weighted mixture.
[[nodiscard]] GaussianDensity moment_match(std::span<const double> weights,
                                           std::span<const GaussianDensity> components);

/// KL(a || b) in nats. Returns +inf when a is singular and b is not.
[[nodiscard]] double kl_divergence(const GaussianDensity& a, const GaussianDensity& b);

/// KL(a || b) + KL(b || a).
[[nodiscard]] double symmetric_kl(const GaussianDensity& a, const GaussianDensity& b);

/// Block-diagonal joint of independent densities, in order.
[[nodiscard]] GaussianDensity stack_independent(std::span<const GaussianDensity> parts);

/// log N(x; mean, cov). Throws SingularCovariance if cov is not positive definite.
[[nodiscard]] double log_gaussian_pdf(const Vector& x, const Vector& mean, const Matrix& cov);

}  // namespace iplpmb
