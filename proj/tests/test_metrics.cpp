#include "iplpmb/errors.hpp"
#include "iplpmb/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

using namespace iplpmb;

namespace {

using iplpmb::testing::brute_force_gospa;

std::vector<Eigen::Vector3d> random_set(std::mt19937_64& rng, std::size_t n, double spread) {
  return iplpmb::testing::random_point_set(rng, n, spread);
}

}  // namespace

TEST(Gospa, FourMissedLandmarks) {
  const std::vector<Eigen::Vector3d> truth{{100, 0, 0}, {-100, 0, 0}, {0, 100, 0}, {0, -100, 0}};
  const std::vector<Eigen::Vector3d> none;
  const GospaResult g = gospa(truth, none);
  EXPECT_NEAR(g.total, 28.2842712474619, 1e-9);
  EXPECT_EQ(g.num_missed, 4u);
  EXPECT_EQ(g.num_false, 0u);
  EXPECT_DOUBLE_EQ(g.localization, 0.0);
}

TEST(Gospa, DecomposesIntoParts) {
  const std::vector<Eigen::Vector3d> truth{{0, 0, 0}, {50, 0, 0}};
  const std::vector<Eigen::Vector3d> est{{3, 4, 0}, {-60, 0, 0}, {0, 80, 0}};
  const GospaResult g = gospa(truth, est);
  EXPECT_EQ(g.num_matched, 1u);
  EXPECT_EQ(g.num_missed, 1u);
  EXPECT_EQ(g.num_false, 2u);
  EXPECT_NEAR(g.localization, 5.0, 1e-14);
  EXPECT_NEAR(g.missed, std::sqrt(200.0), 1e-12);
  EXPECT_NEAR(g.false_targets, std::sqrt(400.0), 1e-12);
  EXPECT_NEAR(g.total, std::sqrt(25.0 + 200.0 + 400.0), 1e-12);
}

TEST(Gospa, PairsAtCutoffStayUnmatched) {
  const std::vector<Eigen::Vector3d> a{{0, 0, 0}};
  const std::vector<Eigen::Vector3d> b{{20, 0, 0}};
  const GospaResult g = gospa(a, b);
  EXPECT_EQ(g.num_matched, 0u);
  EXPECT_NEAR(g.total, 20.0, 1e-12);
}

TEST(Gospa, EqualsBruteForceOnRandomInstances) {
  std::mt19937_64 rng(31);
  const GospaConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_set(rng, rng() % 5, 25.0);
    const auto y = random_set(rng, rng() % 5, 25.0);
    const double oracle = brute_force_gospa(x, y, cfg);
    EXPECT_DOUBLE_EQ(gospa(x, y, cfg).total, oracle) << "trial " << trial;
  }
}

TEST(Gospa, Symmetric) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_set(rng, 1 + rng() % 4, 30.0);
    const auto y = random_set(rng, rng() % 6, 30.0);
    const GospaResult a = gospa(x, y);
    const GospaResult b = gospa(y, x);
    EXPECT_NEAR(a.total, b.total, 1e-12);
    EXPECT_EQ(a.num_missed, b.num_false);
  }
}

TEST(Gospa, ValidatesParameters) {
  const std::vector<Eigen::Vector3d> s;
  EXPECT_THROW((void)gospa(s, s, {.cutoff = 0.0}), InvalidArgument);
  EXPECT_THROW((void)gospa(s, s, {.p = 0.5}), InvalidArgument);
  EXPECT_THROW((void)gospa(s, s, {.alpha = 3.0}), InvalidArgument);
  EXPECT_DOUBLE_EQ(gospa(s, s).total, 0.0);
}

TEST(HeadingError, WrapsAcrossPi) {
  const double deg = std::numbers::pi / 180.0;
  EXPECT_NEAR(heading_error_deg(359.0 * deg, 1.0 * deg), -2.0, 1e-10);
  EXPECT_NEAR(heading_error_deg(1.0 * deg, 359.0 * deg), 2.0, 1e-10);
  EXPECT_NEAR(heading_error_deg(0.5, 0.25), 0.25 / deg, 1e-10);
}

TEST(MapEstimate, ThresholdsOnExistenceAndUsesMapKind) {
  PmbMap map;
  BernoulliComponent a;
  a.existence = 0.7;
  a.kind_weights = {0.2, 0.8};
  a.kind_densities[0] = GaussianDensity(Vector::Constant(3, 1.0), Matrix::Identity(3, 3));
  a.kind_densities[1] = GaussianDensity(Vector::Constant(3, 2.0), Matrix::Identity(3, 3));
  BernoulliComponent b = a;
  b.existence = 0.5;
  b.kind_weights = {0.9, 0.1};
  BernoulliComponent c = a;
  c.existence = 0.49;
  map.bernoullis = {a, b, c};
  const MapEstimate e = extract_map_estimate(map, 0.5);
  ASSERT_EQ(e.sp.size(), 1u);
  ASSERT_EQ(e.va.size(), 1u);
  EXPECT_EQ(e.sp[0], Eigen::Vector3d::Constant(2.0));
  EXPECT_EQ(e.va[0], Eigen::Vector3d::Constant(1.0));
  EXPECT_THROW((void)extract_map_estimate(map, 1.0), InvalidArgument);
}

TEST(UeErrorSummary, HandComputedTwoRuns) {
  const std::vector<UEState> truth{{{0, 0, 0}, 0.0, 10.0}, {{1, 0, 0}, 0.0, 10.0}};
  auto est = [](double x, double y, double h, double b, double sd) {
    return UeEstimate{Vector{{x, y, 0.0, h, b}}, Vector::Constant(5, sd)};
  };
  const std::vector<std::vector<UeEstimate>> runs{
      {est(0.3, 0.4, 0.0, 11.0, 0.1), est(1.0, 0.0, 0.0, 10.0, 0.1)},
      {est(-0.3, -0.4, 0.0, 9.0, 0.3), est(1.0, 0.0, 0.0, 10.0, 0.3)}};
  const UeErrorSummary s = ue_error_summary(runs, truth);
  EXPECT_NEAR(s.position_rmse, std::sqrt(0.5 / 4.0), 1e-14);
  EXPECT_NEAR(s.bias_rmse, std::sqrt(2.0 / 4.0), 1e-14);
  EXPECT_NEAR(s.heading_rmse_deg, 0.0, 1e-14);
  EXPECT_NEAR(s.position_std, (0.1 + 0.3) * std::sqrt(2.0) / 2.0, 1e-14);
  // Step 0: errors +-(0.3, 0.4) have population std 0.5; step 1: zero.
  EXPECT_NEAR(s.position_std_empirical, 0.25, 1e-14);
  EXPECT_NEAR(s.bias_std_empirical, 0.5, 1e-14);
}

TEST(UeErrorSummary, LengthMismatch) {
  const std::vector<UEState> truth(3);
  const std::vector<std::vector<UeEstimate>> runs{std::vector<UeEstimate>(2)};
  EXPECT_THROW((void)ue_error_summary(runs, truth), LengthMismatch);
}

TEST(Gospa, PartsRecomposeTotal) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_set(rng, rng() % 5, 25.0);
    const auto y = random_set(rng, rng() % 5, 25.0);
    const GospaResult g = gospa(x, y);
    const double sum = g.localization * g.localization + g.missed * g.missed + g.false_targets * g.false_targets;
    EXPECT_NEAR(g.total * g.total, sum, 1e-10 * std::max(1.0, sum));
    EXPECT_DOUBLE_EQ(gospa(x, x).total, 0.0);
  }
}

TEST(Gospa, NonDecreasingInCutoff) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_set(rng, rng() % 5, 30.0);
    const auto y = random_set(rng, rng() % 5, 30.0);
    double prev = 0.0;
    for (double c : {1.0, 5.0, 10.0, 20.0, 40.0, 80.0}) {
      const double g = gospa(x, y, {.cutoff = c}).total;
      EXPECT_GE(g, prev - 1e-12);
      prev = g;
    }
  }
}

TEST(MapEstimate, BoundaryAndEmpty) {
  EXPECT_TRUE(extract_map_estimate(PmbMap{}).va.empty());
  PmbMap map;
  BernoulliComponent b;
  b.existence = 0.5;
  b.kind_weights = {0.6, 0.4};
  b.kind_densities[0] = GaussianDensity(Vector::Zero(3), Matrix::Identity(3, 3));
  b.kind_densities[1] = GaussianDensity(Vector::Ones(3), Matrix::Identity(3, 3));
  map.bernoullis = {b};
  const MapEstimate e = extract_map_estimate(map, 0.5);
  EXPECT_EQ(e.va.size(), 1u);
  EXPECT_TRUE(e.sp.empty());
}

TEST(UeErrorSummary, ExactAndOffsetEstimates) {
  const std::vector<UEState> truth{{{0, 0, 0}, 0.2, 1.0}, {{3, 4, 0}, -3.0, 2.0}};
  std::vector<UeEstimate> exact, shifted;
  for (const auto& t : truth) {
    exact.push_back({t.to_vector(), Vector::Zero(5)});
    Vector m = t.to_vector();
    m[0] += 1.0;
    shifted.push_back({m, Vector::Zero(5)});
  }
  const UeErrorSummary a = ue_error_summary({exact}, truth);
  EXPECT_DOUBLE_EQ(a.position_rmse, 0.0);
  EXPECT_DOUBLE_EQ(a.heading_rmse_deg, 0.0);
  EXPECT_DOUBLE_EQ(a.bias_rmse, 0.0);
  EXPECT_NEAR(ue_error_summary({shifted}, truth).position_rmse, 1.0, 1e-15);
}
