#include "iplpmb/linearization.hpp"

#include "iplpmb/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace iplpmb {

namespace {

Vector evaluate(const ModelFunction& fn, const Vector& x) {
  Vector z;
  try {
    z = fn(x);
  } catch (const FunctionEvaluationFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw FunctionEvaluationFailure(std::string("model function failed: ") + e.what());
  }
  if (z.size() != fn.output_dim()) {
    throw DimensionMismatch("model function returned " + std::to_string(z.size()) +
                            " components, mask declares " + std::to_string(fn.output_dim()));
  }
  if (!z.allFinite()) {
    throw FunctionEvaluationFailure("model function returned a non-finite value");
  }
  return z;
}

// Shifts circular components of z by multiples of 2 pi to lie within pi of ref.
void unwrap_against(Vector& z, const Vector& ref, const CircularMask& mask) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      z[i] = ref[i] + wrap_angle(z[i] - ref[i]);
    }
  }
}

// Solves P X = B for symmetric PSD P. Directions whose variance is negligible next to
// the largest one are treated as deterministic (pseudo-inverse): round-off leaves
// them with tiny positive variances that would otherwise blow up the regression.
Matrix solve_spd(const Matrix& p, const Matrix& b) {
  constexpr double kRelTol = 1e-12;
  Eigen::LLT<Matrix> llt(p);
  if (llt.info() == Eigen::Success) {
    const Vector diag = Matrix(llt.matrixL()).diagonal();
    const double lo = diag.minCoeff();
    const double hi = diag.maxCoeff();
    if (lo * lo > kRelTol * hi * hi) {
      return llt.solve(b);
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(p);
  const Vector& ev = es.eigenvalues();
  const double cut = kRelTol * std::max(ev.maxCoeff(), 0.0);
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > cut) {
      inv[i] = 1.0 / ev[i];
    }
  }
  const Matrix& v = es.eigenvectors();
  return v * inv.asDiagonal() * (v.transpose() * b);
}

// Deterministic directions (a state component with zero variance) make both
// covariances singular; the KL is taken on their common support instead.
bool posteriors_converged(const GaussianDensity& a, const GaussianDensity& b, double threshold) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.cov() + b.cov());
  const Vector& ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.maxCoeff());
  const Eigen::Index rank = (ev.array() > tol).count();
  if (rank == a.dim()) {
    try {
      return symmetric_kl(a, b) < threshold;
    } catch (const SingularCovariance&) {
      return false;
    }
  }
  // Eigenvalues are ascending: the first dim - rank vectors span the null space.
  const Matrix null_basis = es.eigenvectors().leftCols(a.dim() - rank);
  const Matrix support = es.eigenvectors().rightCols(rank);
  const Vector diff = a.mean() - b.mean();
  if ((null_basis.transpose() * diff).norm() > 1e-12 * std::max(1.0, a.mean().norm())) {
    return false;
  }
  if (rank == 0) {
    return true;
  }
  const GaussianDensity pa(support.transpose() * a.mean(), support.transpose() * a.cov() * support);
  const GaussianDensity pb(support.transpose() * b.mean(), support.transpose() * b.cov() * support);
  try {
    return symmetric_kl(pa, pb) < threshold;
  } catch (const SingularCovariance&) {
    return false;
  }
}

}  // namespace

Matrix cubature_points(const GaussianDensity& density) {
  const Eigen::Index d = density.dim();
  const Matrix g = cholesky_factor(density.cov());
  const double scale = std::sqrt(static_cast<double>(d));
  Matrix pts(d, 2 * d);
  for (Eigen::Index c = 0; c < d; ++c) {
    pts.col(c) = density.mean() + scale * g.col(c);
    pts.col(d + c) = density.mean() - scale * g.col(c);
  }
  return pts;
}

std::pair<AffineApprox, SlrStatistics> slr(const ModelFunction& fn, const GaussianDensity& density) {
  const Eigen::Index d = density.dim();
  const Eigen::Index n = 2 * d;
  const Matrix pts = cubature_points(density);
  const Eigen::Index dz = fn.output_dim();

  Matrix zs(dz, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Vector z = evaluate(fn, pts.col(c));
    if (c > 0) {
      unwrap_against(z, zs.col(0), fn.circular);
    }
    zs.col(c) = z;
  }

  const double w = 1.0 / static_cast<double>(n);
  // Centered on the first point: identical points reproduce it exactly.
  const Vector z0 = zs.col(0);
  Vector z_mean = z0 + (zs.colwise() - z0).rowwise().sum() * w;
  const Matrix zc = zs.colwise() - z_mean;
  const Matrix sc = pts.colwise() - density.mean();
  Matrix s_zz = w * zc * zc.transpose();
  s_zz = 0.5 * (s_zz + s_zz.transpose()).eval();
  Matrix s_sz = w * sc * zc.transpose();

  wrap_circular(z_mean, fn.circular);

  AffineApprox approx;
  approx.H = solve_spd(density.cov(), s_sz).transpose();
  approx.b = z_mean - approx.H * density.mean();
  Matrix omega = s_zz - approx.H * density.cov() * approx.H.transpose();
  approx.omega = ensure_psd(0.5 * (omega + omega.transpose()), 0.0);

  return {std::move(approx), SlrStatistics{std::move(z_mean), std::move(s_zz), std::move(s_sz)}};
}

AffineApprox ekf_linearize(const ModelFunction& fn, const GaussianDensity& density) {
  const Eigen::Index d = density.dim();
  const Vector& m = density.mean();
  const Vector f0 = evaluate(fn, m);
  Matrix jac(fn.output_dim(), d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(m[i]));
    Vector xp = m;
    Vector xm = m;
    xp[i] += h;
    xm[i] -= h;
    Vector diff = evaluate(fn, xp) - evaluate(fn, xm);
    wrap_circular(diff, fn.circular);
    jac.col(i) = diff / (xp[i] - xm[i]);
  }
  AffineApprox approx;
  approx.b = f0 - jac * m;
  approx.H = std::move(jac);
  approx.omega = Matrix::Zero(fn.output_dim(), fn.output_dim());
  return approx;
}

GaussianDensity kf_update(const GaussianDensity& prior, const AffineApprox& approx, const Vector& z,
                          const Matrix& r, const CircularMask& circular) {
  const Matrix& p = prior.cov();
  const Matrix& h = approx.H;
  if (h.cols() != prior.dim() || h.rows() != z.size() || approx.b.size() != z.size() ||
      r.rows() != z.size() || r.cols() != z.size() || approx.omega.rows() != z.size()) {
    throw DimensionMismatch("kf_update: inconsistent shapes");
  }
  const Matrix ph_t = p * h.transpose();
  Matrix s = h * ph_t + approx.omega + r;
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularInnovation("kf_update: innovation covariance is not positive definite");
  }
  // K = P H^T S^-1
  const Matrix k = llt.solve(ph_t.transpose()).transpose();

  Vector residual = z - h * prior.mean() - approx.b;
  if (!circular.empty()) {
    wrap_circular(residual, circular);
  }
  Vector mean = prior.mean() + k * residual;
  Matrix cov = p - k * ph_t.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(mean), ensure_psd(cov, 0.0)};
}

double predictive_log_likelihood(const GaussianDensity& prior, const AffineApprox& approx, const Vector& z,
                                 const Matrix& r, const CircularMask& circular) {
  Matrix s = approx.H * prior.cov() * approx.H.transpose() + approx.omega + r;
  s = 0.5 * (s + s.transpose()).eval();
  Vector residual = z - approx.H * prior.mean() - approx.b;
  if (!circular.empty()) {
    wrap_circular(residual, circular);
  }
  try {
    return log_gaussian_pdf(residual, Vector::Zero(residual.size()), s);
  } catch (const SingularCovariance&) {
    throw SingularInnovation("predictive_log_likelihood: innovation covariance is singular");
  }
}

IplfResult iplf(const ModelFunction& fn, const GaussianDensity& prior, const Vector& z, const Matrix& r,
                const IplfOptions& opts) {
  if (opts.max_iterations < 1) {
    throw InvalidArgument("iplf: max_iterations must be >= 1");
  }
  GaussianDensity current = prior;
  GaussianDensity previous;
  for (int i = 1; i <= opts.max_iterations; ++i) {
    const auto approx = slr(fn, current).first;
    GaussianDensity next = kf_update(prior, approx, z, r, fn.circular);
    if (i > 1 && posteriors_converged(next, previous, opts.kl_threshold)) {
      return {std::move(previous), i - 1, true};
    }
    previous = next;
    current = std::move(next);
  }
  return {std::move(previous), opts.max_iterations, false};
}

GaussianDensity ekf_update(const ModelFunction& fn, const GaussianDensity& prior, const Vector& z,
                           const Matrix& r) {
  return kf_update(prior, ekf_linearize(fn, prior), z, r, fn.circular);
}

}  // namespace iplpmb
