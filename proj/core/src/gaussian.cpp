#include "iplpmb/gaussian.hpp"

#include "iplpmb/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace iplpmb {

namespace {

double trace_scale(const Matrix& m) {
  return std::max(std::abs(m.trace()), 1.0);
}

// Cholesky for PSD input: pivots below tol become zero columns.
Matrix semidefinite_cholesky(const Matrix& p, double tol) {
  const Eigen::Index n = p.rows();
  Matrix g = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = p(j, j) - g.row(j).head(j).squaredNorm();
    if (pivot < -tol) {
      throw NotPositiveDefinite("cholesky_factor: negative pivot " + std::to_string(pivot) +
                                " at column " + std::to_string(j));
    }
    if (pivot <= tol) {
      continue;
    }
    const double d = std::sqrt(pivot);
    g(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      g(i, j) = (p(i, j) - g.row(i).head(j).dot(g.row(j).head(j))) / d;
    }
  }
  return g;
}

}  // namespace

GaussianDensity::GaussianDensity(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
    throw DimensionMismatch("GaussianDensity: mean has dimension " + std::to_string(mean_.size()) +
                            " but covariance is " + std::to_string(cov_.rows()) + "x" +
                            std::to_string(cov_.cols()));
  }
  if (!mean_.allFinite() || !cov_.allFinite()) {
    throw InvalidArgument("GaussianDensity: non-finite mean or covariance");
  }
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 0.0) {
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  }
}

bool GaussianDensity::is_psd(double tol) const {
  if (dim() == 0) {
    return true;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * trace_scale(cov_);
}

Matrix cholesky_factor(const Matrix& p) {
  if (p.rows() != p.cols()) {
    throw DimensionMismatch("cholesky_factor: matrix is not square");
  }
  Eigen::LLT<Matrix> llt(p);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  const Matrix repaired = ensure_psd(0.5 * (p + p.transpose()), 0.0);
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * trace_scale(repaired);
  return semidefinite_cholesky(repaired, tol);
}

Matrix ensure_psd(const Matrix& m, double floor) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("ensure_psd: matrix is not square");
  }
  if (m.size() == 0) {
    return m;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector& ev = es.eigenvalues();
  if (ev.minCoeff() >= floor) {
    return m;
  }
  const Vector clamped = ev.cwiseMax(floor);
  Matrix out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

GaussianDensity marginalize(const GaussianDensity& joint, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > joint.dim()) {
    throw IndexOutOfRange("marginalize: range [" + std::to_string(start) + ", " +
                          std::to_string(start + count) + ") outside dimension " +
                          std::to_string(joint.dim()));
  }
  return {joint.mean().segment(start, count), joint.cov().block(start, start, count, count)};
}

GaussianDensity moment_match(std::span<const double> weights, std::span<const GaussianDensity> components) {
  if (components.empty()) {
    throw EmptyMixture("moment_match: no components");
  }
  if (weights.size() != components.size()) {
    throw DimensionMismatch("moment_match: weight count differs from component count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      throw InvalidArgument("moment_match: negative or NaN weight");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("moment_match: weights sum to " + std::to_string(total));
  }
  const Eigen::Index d = components.front().dim();
  Vector mean = Vector::Zero(d);
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].dim() != d) {
      throw DimensionMismatch("moment_match: components differ in dimension");
    }
    if (weights[i] != 0.0) {
      mean += weights[i] * components[i].mean();
    }
  }
  Matrix cov = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    const Vector diff = components[i].mean() - mean;
    cov += weights[i] * (components[i].cov() + diff * diff.transpose());
  }
  return {std::move(mean), ensure_psd(0.5 * (cov + cov.transpose()), 0.0)};
}

double kl_divergence(const GaussianDensity& a, const GaussianDensity& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("kl_divergence: dimension mismatch");
  }
  const auto d = static_cast<double>(a.dim());
  Eigen::LLT<Matrix> llt_b(b.cov());
  if (llt_b.info() != Eigen::Success) {
    throw SingularCovariance("kl_divergence: second covariance is not positive definite");
  }
  Eigen::LLT<Matrix> llt_a(a.cov());
  if (llt_a.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  const Matrix lb = llt_b.matrixL();
  const Matrix la = llt_a.matrixL();
  const double logdet_b = 2.0 * lb.diagonal().array().log().sum();
  const double logdet_a = 2.0 * la.diagonal().array().log().sum();
  const double trace_term = llt_b.solve(a.cov()).trace();
  const Vector diff = b.mean() - a.mean();
  const double maha = diff.dot(llt_b.solve(diff));
  const double kl = 0.5 * (trace_term + maha - d + logdet_b - logdet_a);
  return std::max(kl, 0.0);
}

double symmetric_kl(const GaussianDensity& a, const GaussianDensity& b) {
  return kl_divergence(a, b) + kl_divergence(b, a);
}

GaussianDensity stack_independent(std::span<const GaussianDensity> parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) {
    n += p.dim();
  }
  Vector mean(n);
  Matrix cov = Matrix::Zero(n, n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    mean.segment(at, p.dim()) = p.mean();
    cov.block(at, at, p.dim(), p.dim()) = p.cov();
    at += p.dim();
  }
  return {std::move(mean), std::move(cov)};
}

double log_gaussian_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size()) {
    throw DimensionMismatch("log_gaussian_pdf: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance("log_gaussian_pdf: covariance is not positive definite");
  }
  const Matrix l = llt.matrixL();
  const Vector w = l.triangularView<Eigen::Lower>().solve(x - mean);
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const auto d = static_cast<double>(x.size());
  return -0.5 * (w.squaredNorm() + logdet + d * std::log(2.0 * std::numbers::pi));
}

}  // namespace iplpmb
