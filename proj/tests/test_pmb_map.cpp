#include "iplpmb/errors.hpp"
#include "iplpmb/pmb_map.hpp"
#include "iplpmb/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace iplpmb;

namespace {

const Eigen::Vector3d kBs{0.0, 0.0, 40.0};

GaussianDensity iso(const Eigen::Vector3d& m, double var) {
  return {m, var * Matrix::Identity(3, 3)};
}

BernoulliComponent make_bernoulli(std::uint64_t id, double r, KindArray w, const Eigen::Vector3d& va_mean,
                                  const Eigen::Vector3d& sp_mean) {
  BernoulliComponent b;
  b.id = id;
  b.existence = r;
  b.kind_weights = w;
  if (w[0] > 0.0) b.kind_densities[0] = iso(va_mean, 1.0);
  if (w[1] > 0.0) b.kind_densities[1] = iso(sp_mean, 1.0);
  return b;
}

GaussianDensity ue_prior() {
  Vector sd(5);
  sd << 0.3, 0.3, 0.0, 0.005, 0.3;
  return {Vector{{20.0, 0.0, 0.0, 0.5, 300.0}}, sd.array().square().matrix().asDiagonal()};
}

SensorModel sensor() {
  SensorModel s;
  s.toa_max = 500.0;
  return s;
}

}  // namespace

TEST(PppIntensity, UniformInsideRegion) {
  PppIntensity ppp;
  ppp.region = Eigen::AlignedBox3d(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(10, 10, 2));
  ppp.rate_per_kind = {4.0, 2.0};
  EXPECT_DOUBLE_EQ(ppp.intensity(LandmarkKind::VA, {5, 5, 1}), 4.0 / 200.0);
  EXPECT_DOUBLE_EQ(ppp.intensity(LandmarkKind::SP, {5, 5, 1}), 2.0 / 200.0);
  EXPECT_DOUBLE_EQ(ppp.intensity(LandmarkKind::VA, {11, 5, 1}), 0.0);
  EXPECT_THROW((void)ppp.intensity(LandmarkKind::BS, {5, 5, 1}), UnsupportedKind);
}

TEST(Bernoulli, MapKindAndDensityAccess) {
  const auto b = make_bernoulli(1, 0.5, {0.4, 0.6}, {1, 0, 0}, {2, 0, 0});
  EXPECT_EQ(b.map_kind(), LandmarkKind::SP);
  EXPECT_EQ(b.density(LandmarkKind::SP).mean(), Eigen::Vector3d(2, 0, 0));
  const auto tie = make_bernoulli(2, 0.5, {0.5, 0.5}, {1, 0, 0}, {2, 0, 0});
  EXPECT_EQ(tie.map_kind(), LandmarkKind::VA);
  const auto only_va = make_bernoulli(3, 0.5, {1.0, 0.0}, {1, 0, 0}, {});
  EXPECT_THROW((void)only_va.density(LandmarkKind::SP), InvalidArgument);
}

TEST(Misdetection, ClosedForm) {
  const auto b = make_bernoulli(1, 0.8, {0.5, 0.5}, {1, 0, 0}, {2, 0, 0});
  const MisdetectionResult m = misdetection_update(b, 0.9);
  EXPECT_NEAR(m.weight, 1.0 - 0.72, 1e-15);
  EXPECT_NEAR(m.bernoulli.existence, 0.8 * 0.1 / 0.28, 1e-15);
  EXPECT_EQ(m.bernoulli.kind_weights, b.kind_weights);
  EXPECT_EQ(m.bernoulli.kind_densities[0]->mean(), b.kind_densities[0]->mean());
}

TEST(Misdetection, KindAwareReweighting) {
  const auto b = make_bernoulli(1, 0.6, {0.7, 0.3}, {1, 0, 0}, {2, 0, 0});
  // The SP hypothesis is out of view, so only the VA hypothesis could have been missed.
  const MisdetectionResult m = misdetection_update(b, KindArray{0.9, 0.0});
  const double p_eff = 0.7 * 0.9;
  const double miss_va = 0.7 * 0.1, miss_sp = 0.3;
  EXPECT_NEAR(m.weight, 1.0 - 0.6 * p_eff, 1e-15);
  EXPECT_NEAR(m.bernoulli.existence, 0.6 * (miss_va + miss_sp) / m.weight, 1e-15);
  EXPECT_NEAR(m.bernoulli.kind_weights[0], miss_va / (miss_va + miss_sp), 1e-15);
  EXPECT_NEAR(m.bernoulli.kind_weights[1], miss_sp / (miss_va + miss_sp), 1e-15);
}

TEST(Misdetection, CertainDetectionOfCertainLandmark) {
  const auto b = make_bernoulli(1, 1.0, {1.0, 0.0}, {1, 0, 0}, {});
  const MisdetectionResult m = misdetection_update(b, 1.0);
  EXPECT_DOUBLE_EQ(m.weight, 0.0);
  EXPECT_GE(m.bernoulli.existence, 0.0);
  EXPECT_LE(m.bernoulli.existence, 1.0);
}

TEST(PmbmToPmb, MarginalizesById) {
  HypothesisMap h1{0.25, {make_bernoulli(1, 1.0, {1.0, 0.0}, {0, 0, 0}, {}),
                          make_bernoulli(2, 0.5, {1.0, 0.0}, {10, 0, 0}, {})}};
  HypothesisMap h2{0.75, {make_bernoulli(1, 0.2, {1.0, 0.0}, {4, 0, 0}, {})}};
  const std::vector<HypothesisMap> hs{h1, h2};
  const PmbMap out = pmbm_to_pmb(PppIntensity{}, hs, 9);
  ASSERT_EQ(out.bernoullis.size(), 2u);
  EXPECT_EQ(out.next_id, 9u);

  const auto& b1 = out.bernoullis[0];
  EXPECT_EQ(b1.id, 1u);
  EXPECT_NEAR(b1.existence, 0.25 * 1.0 + 0.75 * 0.2, 1e-15);
  // Mixture weights proportional to w_h r_h: 0.25 and 0.15.
  const double wa = 0.25 / 0.4, wb = 0.15 / 0.4;
  const double mean = wb * 4.0;
  EXPECT_NEAR(b1.density(LandmarkKind::VA).mean()[0], mean, 1e-14);
  EXPECT_NEAR(b1.density(LandmarkKind::VA).cov()(0, 0), 1.0 + wa * mean * mean + wb * (4 - mean) * (4 - mean),
              1e-13);
  EXPECT_NEAR(b1.density(LandmarkKind::VA).cov()(1, 1), 1.0, 1e-14);

  const auto& b2 = out.bernoullis[1];
  EXPECT_EQ(b2.id, 2u);
  EXPECT_NEAR(b2.existence, 0.25 * 0.5, 1e-15);
  EXPECT_EQ(b2.density(LandmarkKind::VA).mean(), Eigen::Vector3d(10, 0, 0));
}

TEST(PmbmToPmb, MixesKindWeights) {
  HypothesisMap h1{0.5, {make_bernoulli(4, 0.8, {1.0, 0.0}, {0, 0, 0}, {})}};
  HypothesisMap h2{0.5, {make_bernoulli(4, 0.4, {0.0, 1.0}, {}, {3, 3, 3})}};
  const std::vector<HypothesisMap> hs{h1, h2};
  const PmbMap out = pmbm_to_pmb(PppIntensity{}, hs, 5);
  ASSERT_EQ(out.bernoullis.size(), 1u);
  EXPECT_NEAR(out.bernoullis[0].kind_weights[0], 0.4 / 0.6, 1e-15);
  EXPECT_NEAR(out.bernoullis[0].kind_weights[1], 0.2 / 0.6, 1e-15);
}

TEST(PmbmToPmb, ValidatesWeights) {
  const std::vector<HypothesisMap> none;
  EXPECT_THROW((void)pmbm_to_pmb(PppIntensity{}, none, 1), EmptyHypothesisSet);
  const std::vector<HypothesisMap> bad{HypothesisMap{0.5, {}}};
  EXPECT_THROW((void)pmbm_to_pmb(PppIntensity{}, bad, 1), InvalidArgument);
}

TEST(Prune, DropsLowExistenceAndLowKindWeight) {
  PmbMap map;
  map.bernoullis = {make_bernoulli(1, 1e-4, {1.0, 0.0}, {0, 0, 0}, {}),
                    make_bernoulli(2, 0.9, {0.9995, 0.0005}, {50, 0, 0}, {60, 0, 0})};
  const PmbMap out = prune(map, {});
  ASSERT_EQ(out.bernoullis.size(), 1u);
  EXPECT_EQ(out.bernoullis[0].id, 2u);
  EXPECT_DOUBLE_EQ(out.bernoullis[0].kind_weights[0], 1.0);
  EXPECT_FALSE(out.bernoullis[0].kind_densities[1].has_value());
}

TEST(Prune, MergesCloseSameKindComponents) {
  PmbMap map;
  map.bernoullis = {make_bernoulli(1, 0.6, {1.0, 0.0}, {0, 0, 0}, {}),
                    make_bernoulli(2, 0.2, {1.0, 0.0}, {1, 0, 0}, {}),
                    make_bernoulli(3, 0.9, {0.0, 1.0}, {}, {0.5, 0, 0}),
                    make_bernoulli(4, 0.5, {1.0, 0.0}, {30, 0, 0}, {})};
  const PmbMap out = prune(map, {});
  ASSERT_EQ(out.bernoullis.size(), 3u);
  const auto& merged = out.bernoullis[0];
  EXPECT_EQ(merged.id, 1u);
  EXPECT_NEAR(merged.existence, 0.8, 1e-15);
  // Existence-weighted: 0.75 * 0 + 0.25 * 1.
  EXPECT_NEAR(merged.density(LandmarkKind::VA).mean()[0], 0.25, 1e-14);
  EXPECT_EQ(out.bernoullis[1].id, 3u);
  EXPECT_EQ(out.bernoullis[2].id, 4u);
}

TEST(Prune, MergedExistenceIsCapped) {
  PmbMap map;
  map.bernoullis = {make_bernoulli(1, 0.9, {1.0, 0.0}, {0, 0, 0}, {}),
                    make_bernoulli(2, 0.8, {1.0, 0.0}, {0.1, 0, 0}, {})};
  const PmbMap out = prune(map, {});
  ASSERT_EQ(out.bernoullis.size(), 1u);
  EXPECT_DOUBLE_EQ(out.bernoullis[0].existence, 1.0);
}

TEST(Birth, DensityCentersOnInvertedMeasurement) {
  const GeometryModel model(kBs);
  const PppIntensity ppp = ExperimentConfig::default_ppp();
  const GaussianDensity ue = ue_prior();
  const Eigen::Vector3d va{200.0, 0.0, 40.0};
  const Measurement z = model.measure({va, LandmarkKind::VA}, UEState::from_vector(ue.mean()));
  const BirthResult br = birth_bernoulli(z, ue, ppp, sensor(), model, 42);
  ASSERT_TRUE(br.bernoulli.has_value());
  const BernoulliComponent& b = *br.bernoulli;
  EXPECT_EQ(b.id, 42u);
  EXPECT_LT((b.density(LandmarkKind::VA).mean() - va).norm(), 0.5);
  EXPECT_NEAR(b.existence, br.likelihood / (sensor().clutter_density() + br.likelihood), 1e-15);
  EXPECT_NEAR(br.weight, sensor().clutter_density() + br.likelihood, 1e-15 * br.weight);
  EXPECT_NEAR(b.kind_weights[0] + b.kind_weights[1], 1.0, 1e-15);
  EXPECT_TRUE(b.density(LandmarkKind::VA).is_psd());
}

// Importance-sampling estimate of lambda p_D integral N(z; h(x, s), R) N(s; ue) dx with
// the birth density (covariance inflated) as proposal.
TEST(Birth, LikelihoodMatchesMonteCarloIntegral) {
  const GeometryModel model(kBs);
  const PppIntensity ppp = ExperimentConfig::default_ppp();
  const GaussianDensity ue = ue_prior();
  const SensorModel s = sensor();
  const Eigen::Vector3d va{200.0, 0.0, 40.0};
  Vector z = model.predict(ue.mean(), va, LandmarkKind::VA);
  z[0] += 0.05;
  z[1] -= 0.004;
  const BirthResult br = birth_bernoulli(Measurement::from_vector(z), ue, ppp, s, model, 1);
  ASSERT_TRUE(br.bernoulli.has_value());
  ASSERT_GT(br.kind_likelihood[0], 0.0);

  const GaussianDensity q(br.bernoulli->density(LandmarkKind::VA).mean(),
                          4.0 * br.bernoulli->density(LandmarkKind::VA).cov());
  const Matrix lq = cholesky_factor(q.cov());
  const Matrix lue = cholesky_factor(ue.cov());
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  const int n = 200000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    Vector e3(3), e5(5);
    for (int k = 0; k < 3; ++k) e3[k] = nd(rng);
    for (int k = 0; k < 5; ++k) e5[k] = nd(rng);
    const Vector x = q.mean() + lq * e3;
    const Vector st = ue.mean() + lue * e5;
    Vector r = z - model.predict(st, x, LandmarkKind::VA);
    wrap_circular(r, model.circular_mask());
    acc += std::exp(log_gaussian_pdf(r, Vector::Zero(5), s.noise_cov) - log_gaussian_pdf(x, q.mean(), q.cov()));
  }
  const double oracle = ppp.intensity(LandmarkKind::VA, va) * s.detection_prob * acc / n;
  EXPECT_NEAR(br.kind_likelihood[0] / oracle, 1.0, 0.05);
}

TEST(Birth, NoMassOutsideSurveillanceRegion) {
  const GeometryModel model(kBs);
  PppIntensity ppp;
  ppp.region = Eigen::AlignedBox3d(Eigen::Vector3d(-10, -10, -10), Eigen::Vector3d(10, 10, 10));
  const GaussianDensity ue = ue_prior();
  const Measurement z = model.measure({{200.0, 0.0, 40.0}, LandmarkKind::VA}, UEState::from_vector(ue.mean()));
  const BirthResult br = birth_bernoulli(z, ue, ppp, sensor(), model, 1);
  EXPECT_FALSE(br.bernoulli.has_value());
  EXPECT_DOUBLE_EQ(br.likelihood, 0.0);
  EXPECT_DOUBLE_EQ(br.weight, sensor().clutter_density());
}
