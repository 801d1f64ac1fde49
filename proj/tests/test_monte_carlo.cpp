#include "iplpmb/errors.hpp"
#include "iplpmb/monte_carlo.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace iplpmb;

namespace {

ExperimentConfig short_config(int steps) {
  ExperimentConfig c;
  c.scenario.trajectory.steps = steps;
  c.filter.gamma = 3;
  return c;
}

}  // namespace

TEST(MeanStd, PopulationStatistics) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Stat s = mean_std(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(mean_std(std::vector<double>{}).mean, 0.0);
}

TEST(RunSingle, DeterministicUnderSeed) {
  const ExperimentConfig c = short_config(4);
  const GroundTruth truth = generate_scenario(c.scenario);
  const RunRecord a = run_single(c, truth, Linearizer::Posterior, 0, 11);
  const RunRecord b = run_single(c, truth, Linearizer::Posterior, 0, 11);
  ASSERT_FALSE(a.failed) << a.error;
  ASSERT_EQ(a.steps.size(), 4u);
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_EQ(a.steps[k].ue.mean, b.steps[k].ue.mean);
    EXPECT_EQ(a.steps[k].gospa_va.total, b.steps[k].gospa_va.total);
    EXPECT_EQ(a.steps[k].measurements, b.steps[k].measurements);
  }
  const RunRecord other = run_single(c, truth, Linearizer::Posterior, 1, 12);
  EXPECT_NE(other.steps[0].ue.mean, a.steps[0].ue.mean);
}

TEST(RunSingle, LinearizersSeeTheSameData) {
  const ExperimentConfig c = short_config(3);
  const GroundTruth truth = generate_scenario(c.scenario);
  const RunRecord ek = run_single(c, truth, Linearizer::Prior, 0, 5);
  const RunRecord ipl = run_single(c, truth, Linearizer::Posterior, 0, 5);
  ASSERT_EQ(ek.steps.size(), ipl.steps.size());
  for (std::size_t k = 0; k < ek.steps.size(); ++k) {
    EXPECT_EQ(ek.steps[k].measurements, ipl.steps[k].measurements);
    EXPECT_EQ(ek.steps[k].iterations > 0.0 ? 1.0 : 0.0, ek.steps[k].iterations);
  }
}

TEST(RunSingle, InvariantProbes) {
  ExperimentConfig c = short_config(6);
  c.filter.check_contraction = true;
  const GroundTruth truth = generate_scenario(c.scenario);
  const RunRecord r = run_single(c, truth, Linearizer::Posterior, 0, 2);
  ASSERT_FALSE(r.failed) << r.error;
  for (const StepRecord& s : r.steps) {
    EXPECT_NEAR(s.weight_sum, 1.0, 1e-9);
    EXPECT_TRUE(s.covariances_psd);
    EXPECT_TRUE(s.existence_in_range);
    EXPECT_GE(s.min_contraction_eig, -1e-9);
    EXPECT_GE(s.hypotheses, 1u);
  }
}

TEST(RunMonteCarlo, ThreadCountDoesNotChangeResults) {
  const ExperimentConfig c = short_config(3);
  const MonteCarloResult one = run_monte_carlo(c, {.linearizer = Linearizer::Posterior, .runs = 4, .base_seed = 7,
                                                   .threads = 1});
  const MonteCarloResult many = run_monte_carlo(c, {.linearizer = Linearizer::Posterior, .runs = 4, .base_seed = 7,
                                                    .threads = 3});
  ASSERT_EQ(one.runs.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(one.runs[r].seed, 7u + r);
    ASSERT_EQ(one.runs[r].steps.size(), many.runs[r].steps.size());
    for (std::size_t k = 0; k < one.runs[r].steps.size(); ++k) {
      EXPECT_EQ(one.runs[r].steps[k].ue.mean, many.runs[r].steps[k].ue.mean);
    }
  }
  EXPECT_EQ(one.ue.position_rmse, many.ue.position_rmse);
  EXPECT_THROW((void)run_monte_carlo(c, {.runs = 0}), InvalidArgument);
}

TEST(AggregateRuns, ConstantRunsGiveZeroSpread) {
  const ExperimentConfig c = short_config(2);
  const GroundTruth truth = generate_scenario(c.scenario);
  const RunRecord r = run_single(c, truth, Linearizer::Prior, 0, 3);
  ASSERT_FALSE(r.failed);
  RunRecord failed;
  failed.failed = true;
  const MonteCarloResult m = aggregate_runs({r, r, r, failed}, truth, c.gospa);
  EXPECT_EQ(m.failed_runs, 1u);
  ASSERT_EQ(m.per_step.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_DOUBLE_EQ(m.per_step[k].gospa_va.mean, r.steps[k].gospa_va.total);
    EXPECT_NEAR(m.per_step[k].gospa_va.std, 0.0, 1e-12);
    EXPECT_NEAR(m.per_step[k].pos_err.std, 0.0, 1e-12);
    EXPECT_NEAR(m.per_step[k].pos_rmse, r.steps[k].pos_err, 1e-12);
  }
  EXPECT_NEAR(m.ue.position_std_empirical, 0.0, 1e-12);
  EXPECT_NEAR(m.initial_gospa_va.total, 28.2842712474619, 1e-9);
}
