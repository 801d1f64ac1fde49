#include "iplpmb/errors.hpp"
#include "iplpmb/linearization.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace iplpmb;

namespace {

GaussianDensity scalar(double m, double v) {
  return {Vector::Constant(1, m), Matrix::Constant(1, 1, v)};
}

ModelFunction quadratic_fig() {
  return {[](const Vector& x) { return Vector::Constant(1, -0.1 * x[0] * x[0] + 3.0); }, {false}};
}

GaussianDensity correlated_3d() {
  Matrix p(3, 3);
  p << 2.0, 0.3, -0.2,
       0.3, 1.0, 0.1,
      -0.2, 0.1, 0.5;
  return {Vector{{1.0, -2.0, 0.5}}, p};
}

}  // namespace

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.5), 0.5);
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), std::numbers::pi, 1e-15);
  EXPECT_NEAR(wrap_angle(3.0 * std::numbers::pi / 2.0), -std::numbers::pi / 2.0, 1e-15);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2.0 * std::numbers::pi, 1e-15);
}

TEST(CubaturePoints, ReproduceMeanAndCovariance) {
  const GaussianDensity g = correlated_3d();
  const Matrix pts = cubature_points(g);
  ASSERT_EQ(pts.cols(), 6);
  const Vector m = pts.rowwise().mean();
  const Matrix c = pts.colwise() - m;
  EXPECT_TRUE(m.isApprox(g.mean(), 1e-14));
  EXPECT_TRUE((c * c.transpose() / 6.0).isApprox(g.cov(), 1e-13));
}

// For h quadratic, E[h] and Cov(x, h) involve moments up to degree three, which the
// cubature rule integrates exactly: E[x0^2] = m0^2 + P00, Cov(x, x0^2) = 2 m0 P(:, 0).
TEST(Slr, ExactForQuadraticMoments) {
  const GaussianDensity g = correlated_3d();
  const ModelFunction h{[](const Vector& x) { return Vector{{x[0] * x[0] + x[1], 3.0 * x[2] - 1.0}}; },
                        {false, false}};
  const auto [approx, stats] = slr(h, g);
  const Vector& m = g.mean();
  const Matrix& p = g.cov();

  Vector z_expected{{m[0] * m[0] + p(0, 0) + m[1], 3.0 * m[2] - 1.0}};
  Matrix s_sz(3, 2);
  s_sz.col(0) = 2.0 * m[0] * p.col(0) + p.col(1);
  s_sz.col(1) = 3.0 * p.col(2);
  const Matrix h_expected = (p.inverse() * s_sz).transpose();

  EXPECT_TRUE(stats.z_pred.isApprox(z_expected, 1e-12));
  EXPECT_TRUE(stats.s_sz.isApprox(s_sz, 1e-12));
  EXPECT_TRUE(approx.H.isApprox(h_expected, 1e-12));
  EXPECT_TRUE((approx.H * m + approx.b).isApprox(z_expected, 1e-12));
  EXPECT_GT(approx.omega(0, 0), 0.0);
  EXPECT_NEAR(approx.omega(1, 1), 0.0, 1e-12);
}

TEST(Slr, AffineFunctionIsReproduced) {
  Matrix a(2, 3);
  a << 1.0, -2.0, 0.5,
       0.0, 4.0, 1.0;
  const Vector c{{0.7, -3.0}};
  const ModelFunction h{[a, c](const Vector& x) { return Vector(a * x + c); }, {false, false}};
  const auto [approx, stats] = slr(h, correlated_3d());
  EXPECT_TRUE(approx.H.isApprox(a, 1e-12));
  EXPECT_LT((approx.b - c).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(approx.omega.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Slr, UnwrapsCircularOutputsNearPi) {
  const double m = std::numbers::pi - 0.01;
  const ModelFunction h{[](const Vector& x) { return Vector::Constant(1, wrap_angle(x[0])); }, {true}};
  const auto [approx, stats] = slr(h, scalar(m, 0.04));
  EXPECT_NEAR(stats.z_pred[0], m, 1e-12);
  EXPECT_NEAR(approx.H(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(stats.s_zz(0, 0), 0.04, 1e-12);
}

TEST(Slr, DeterministicComponentGivesFiniteRegression) {
  Matrix p = Matrix::Zero(3, 3);
  p(0, 0) = 1.0;
  p(1, 1) = 1e-22;  // round-off residue of a deterministic state
  p(2, 2) = 4.0;
  const ModelFunction h{[](const Vector& x) { return Vector::Constant(1, std::hypot(x[0], x[1] + 5.0, x[2])); },
                        {false}};
  const auto [approx, stats] = slr(h, GaussianDensity(Vector{{3.0, 0.0, 2.0}}, p));
  EXPECT_TRUE(approx.H.allFinite());
  EXPECT_LT(approx.H.cwiseAbs().maxCoeff(), 2.0);
}

TEST(Slr, WrapsFunctionErrors) {
  const ModelFunction bad{[](const Vector&) -> Vector { throw std::runtime_error("boom"); }, {false}};
  EXPECT_THROW((void)slr(bad, scalar(0.0, 1.0)), FunctionEvaluationFailure);
  const ModelFunction nan{[](const Vector&) { return Vector::Constant(1, std::nan("")); }, {false}};
  EXPECT_THROW((void)slr(nan, scalar(0.0, 1.0)), FunctionEvaluationFailure);
  const ModelFunction wrong_dim{[](const Vector&) { return Vector::Zero(2); }, {false}};
  EXPECT_THROW((void)slr(wrong_dim, scalar(0.0, 1.0)), DimensionMismatch);
}

TEST(EkfLinearize, MatchesAnalyticJacobian) {
  const ModelFunction h{[](const Vector& x) { return Vector{{std::sin(x[0]) * x[1], std::exp(0.3 * x[1])}}; },
                        {false, false}};
  const GaussianDensity g(Vector{{0.4, 2.0}}, Matrix::Identity(2, 2));
  const AffineApprox a = ekf_linearize(h, g);
  Matrix j(2, 2);
  j << std::cos(0.4) * 2.0, std::sin(0.4),
       0.0, 0.3 * std::exp(0.6);
  EXPECT_LT((a.H - j).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((a.H * g.mean() + a.b - h(g.mean())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(a.omega, Matrix::Zero(2, 2));
}

TEST(KfUpdate, ScalarClosedForm) {
  const AffineApprox a{Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.5)};
  const GaussianDensity post =
      kf_update(scalar(1.0, 3.0), a, Vector::Constant(1, 4.0), Matrix::Constant(1, 1, 0.5), {false});
  const double s = 4.0 * 3.0 + 0.5 + 0.5;
  const double k = 3.0 * 2.0 / s;
  EXPECT_NEAR(post.mean()[0], 1.0 + k * (4.0 - 3.0), 1e-14);
  EXPECT_NEAR(post.cov()(0, 0), 3.0 - k * 2.0 * 3.0, 1e-14);
}

TEST(KfUpdate, WrapsCircularResidual) {
  const AffineApprox a{Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Zero(1, 1)};
  const GaussianDensity post = kf_update(scalar(3.1, 0.01), a, Vector::Constant(1, -3.1),
                                         Matrix::Constant(1, 1, 0.01), {true});
  // Residual -6.2 wraps to 2 pi - 6.2 ~ 0.083, split evenly.
  EXPECT_NEAR(post.mean()[0], 3.1 + 0.5 * (2.0 * std::numbers::pi - 6.2), 1e-12);
}

TEST(KfUpdate, RejectsBadShapesAndSingularInnovation) {
  const AffineApprox a{Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Zero(1, 1)};
  EXPECT_THROW((void)kf_update(scalar(0.0, 1.0), a, Vector::Zero(2), Matrix::Identity(2, 2), {}),
               DimensionMismatch);
  EXPECT_THROW((void)kf_update(scalar(0.0, 0.0), a, Vector::Zero(1), Matrix::Zero(1, 1), {}),
               SingularInnovation);
}

TEST(PredictiveLogLikelihood, MatchesScalarDensity) {
  const AffineApprox a{Matrix::Constant(1, 1, -0.6), Vector::Constant(1, 3.9), Matrix::Constant(1, 1, 0.2)};
  const double ll = predictive_log_likelihood(scalar(3.0, 4.0), a, Vector::Constant(1, 0.5),
                                              Matrix::Constant(1, 1, 0.1), {false});
  const double s = 0.36 * 4.0 + 0.2 + 0.1;
  const double r = 0.5 - (-0.6 * 3.0 + 3.9);
  EXPECT_NEAR(ll, -0.5 * std::log(2.0 * std::numbers::pi * s) - 0.5 * r * r / s, 1e-14);
}

// h(x) = -0.1 x^2 + 3, R = 0.1, prior N(3, 4), z = 0.5.
// EKF: H = -0.6, h(3) = 2.1, S = 1.54, K = -2.4 / 1.54.
// First IPLF pass: cubature points 1 and 5 give z = 1.7, Cov(x, h) = -2.4, H = -0.6,
// Omega = 1.44 - 0.36 * 4 = 0, so the variance equals the EKF one.
TEST(Iplf, ScalarQuadraticHandArithmetic) {
  const ModelFunction h = quadratic_fig();
  const GaussianDensity prior = scalar(3.0, 4.0);
  const Vector z = Vector::Constant(1, 0.5);
  const Matrix r = Matrix::Constant(1, 1, 0.1);

  const double k = -2.4 / 1.54;
  const double var = 4.0 - 2.4 * 2.4 / 1.54;
  const GaussianDensity ekf = ekf_update(h, prior, z, r);
  EXPECT_NEAR(ekf.mean()[0], 3.0 + k * (0.5 - 2.1), 1e-6);
  EXPECT_NEAR(ekf.cov()(0, 0), var, 1e-6);
  EXPECT_NEAR(ekf.mean()[0], 5.4935064935, 1e-6);

  const GaussianDensity first = iplf(h, prior, z, r, {.max_iterations = 1, .kl_threshold = 1e-4}).posterior;
  EXPECT_NEAR(first.mean()[0], 3.0 + k * (0.5 - 1.7), 1e-9);
  EXPECT_NEAR(first.cov()(0, 0), var, 1e-9);
  EXPECT_NEAR(first.mean()[0], 4.8701298701, 1e-6);

  const IplfResult full = iplf(h, prior, z, r);
  EXPECT_TRUE(full.converged);
  EXPECT_GT(full.iterations, 1);
  EXPECT_LE(full.iterations, 10);
  EXPECT_LT(full.posterior.cov()(0, 0), var);
}

TEST(Iplf, AffineTerminatesAfterOneIteration) {
  Matrix a(2, 3);
  a << 1.0, 0.5, 0.0,
       0.0, -1.0, 2.0;
  const ModelFunction h{[a](const Vector& x) { return Vector(a * x); }, {false, false}};
  const GaussianDensity prior = correlated_3d();
  const Vector z{{0.2, 1.0}};
  const Matrix r = 0.3 * Matrix::Identity(2, 2);
  const IplfResult res = iplf(h, prior, z, r);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 1);

  const AffineApprox exact{a, Vector::Zero(2), Matrix::Zero(2, 2)};
  const GaussianDensity kf = kf_update(prior, exact, z, r, h.circular);
  EXPECT_LT((res.posterior.mean() - kf.mean()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((res.posterior.cov() - kf.cov()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Iplf, ConvergesWithDeterministicStateComponent) {
  Matrix p = Matrix::Zero(3, 3);
  p(0, 0) = 0.25;
  p(2, 2) = 0.25;
  const GaussianDensity prior(Vector{{10.0, 0.0, 3.0}}, p);
  const ModelFunction h{[](const Vector& x) { return Vector{{x.head<3>().norm(), std::atan2(x[2], x[0])}}; },
                        {false, true}};
  const IplfResult res = iplf(h, prior, Vector{{10.6, 0.31}}, 0.01 * Matrix::Identity(2, 2));
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.iterations, 10);
  EXPECT_DOUBLE_EQ(res.posterior.mean()[1], 0.0);
  EXPECT_NEAR(res.posterior.cov()(1, 1), 0.0, 1e-15);
}

TEST(Iplf, RejectsZeroIterationCap) {
  EXPECT_THROW((void)iplf(quadratic_fig(), scalar(3.0, 4.0), Vector::Constant(1, 0.5),
                          Matrix::Constant(1, 1, 0.1), {.max_iterations = 0}),
               InvalidArgument);
}
