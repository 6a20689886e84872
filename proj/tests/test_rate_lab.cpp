#include <gtest/gtest.h>

#include <cmath>

#include "evengw/rate_lab.hpp"

using namespace evengw;

TEST(RhoN, Formula) {
  EXPECT_DOUBLE_EQ(rho_n(16, 2), 0.25);
  EXPECT_DOUBLE_EQ(rho_n(16, 4), 0.25 * std::log(std::numbers::e * 16));
  EXPECT_DOUBLE_EQ(rho_n(32, 8), std::pow(32.0, -0.25));
  EXPECT_DOUBLE_EQ(rho_n(1, 3), 1.0);
  for (std::size_t d : {1u, 3u, 4u, 5u, 9u})
    for (double n = 3; n < 1e5; n *= 3) EXPECT_GT(rho_n(n, d), rho_n(n * 3, d)) << d;
  // The log factor makes d = 4 increase between n = 1 and n = e.
  EXPECT_LT(rho_n(1, 4), rho_n(2, 4));
  EXPECT_THROW(rho_n(0.5, 2), InvalidArgument);
}

TEST(LowerBound, Examples) {
  EXPECT_DOUBLE_EQ(lower_bound_exact(0.25, 1, 1, 1), 0.375);
  EXPECT_DOUBLE_EQ(lower_bound_exact(0.5, 1, 1, 1), 0.5);
  EXPECT_NEAR(lower_bound_exact(0.25, 3, 1, 2), 2460.375, 1e-9);
  EXPECT_THROW(lower_bound_exact(0.0, 1, 1, 1), InvalidArgument);
  EXPECT_THROW(lower_bound_exact(1.0, 1, 1, 1), InvalidArgument);
  EXPECT_THROW(lower_bound_exact(0.5, 0, 1, 1), InvalidArgument);
  EXPECT_THROW(lower_bound_exact(0.5, 1, 0, 1), InvalidArgument);
}

TEST(LowerBound, ExactCountGivesZeroError) {
  for (std::size_t n : {4u, 64u, 4096u}) EXPECT_EQ(lower_check_error(n / 4, n, 0.25, 1.0, 1, 1), 0.0);
  EXPECT_DOUBLE_EQ(lower_check_error(0, 8, 0.25, 1.0, 1, 1), 0.375);
}

TEST(Stats, SlopeAndSpearman) {
  std::vector<double> n{10, 100, 1000}, y{1, 0.1, 0.01};
  EXPECT_NEAR(*fit_loglog_slope(n, y), -1.0, 1e-12);
  EXPECT_FALSE(fit_loglog_slope(n, {1, 0, 1}).has_value());
  EXPECT_DOUBLE_EQ(spearman(n, y), -1.0);
  EXPECT_DOUBLE_EQ(spearman(n, {1, 2, 3}), 1.0);
  EXPECT_TRUE(std::isnan(spearman(n, {2, 2, 2})));
  auto r = ranks({3, 1, 3, 2});
  EXPECT_EQ(r, (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(PopulationMoment, AgainstLargeSamples) {
  const std::vector<DistributionSpec> specs{DistributionSpec::uniform_cube(2, 1.5), DistributionSpec::uniform_ball(3, 2.0),
                                            DistributionSpec::uniform_ball(1, 1.0), DistributionSpec::two_point(2, 3.0, 0.3)};
  for (const auto& s : specs) {
    const auto m = sample(s, 200000, 77);
    for (int order = 0; order <= 4; ++order)
      for (const auto& a : multi_indices_of_order(s.dim, order)) {
        const double exact = population_moment(s, a);
        EXPECT_NEAR(moment(m, a), exact, 0.02 * std::max(1.0, std::abs(exact))) << s.to_string();
      }
  }
  EXPECT_NEAR(population_moment(DistributionSpec::uniform_ball(1, 1.0), MultiIndex({2})), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(population_moment(DistributionSpec::uniform_ball(2, 1.0), MultiIndex({2, 0})), 0.25, 1e-15);
}

TEST(PopulationMarginal, TwoPointAgainstDelta) {
  // Against delta_0 the coupling term vanishes, so M equals the closed form.
  for (int r = 1; r <= 2; ++r)
    for (int k = 1; k <= 2; ++k) {
      const auto exp = cached_expansion(r, k, 1, 1);
      EXPECT_NEAR(population_marginal_value(*exp, DistributionSpec::two_point(1, 1.5, 0.25), DistributionSpec::point_mass(1)),
                  lower_bound_exact(0.25, 1.5, r, k), 1e-10);
    }
}

TEST(RateExperiment, Validation) {
  RateExperiment e;
  e.n_grid = {8};
  EXPECT_THROW(run_rate_experiment(e), InvalidArgument);
  e.n_grid = {8, 8};
  EXPECT_THROW(run_rate_experiment(e), InvalidArgument);
  e.n_grid = {4, 8};
  e.trials = 0;
  EXPECT_THROW(run_rate_experiment(e), InvalidArgument);
  e.trials = 2;
  e.dist_x = DistributionSpec::uniform_cube(1, 1);
  EXPECT_THROW(run_rate_experiment(e), InvalidArgument);  // self_zero with different laws
  e.reference = Reference::ClosedForm;
  EXPECT_THROW(run_rate_experiment(e), InvalidArgument);
  EXPECT_THROW(parse_reference("exact"), InvalidArgument);
  EXPECT_EQ(parse_reference("high_n_estimate"), Reference::HighNEstimate);
}

TEST(RateExperiment, PointMassSelfZero) {
  RateExperiment e;
  e.dist_x = e.dist_y = DistributionSpec::point_mass(2);
  e.n_grid = {4, 8, 16};
  e.trials = 5;
  auto res = run_rate_experiment(e);
  for (const auto& v : res.per_n_errors)
    for (double x : v) EXPECT_EQ(x, 0.0);
  EXPECT_FALSE(res.slope_defined);
  EXPECT_FALSE(res.notes.empty());
}

TEST(RateExperiment, TwoPointFastPathCrossChecked) {
  auto res = empirical_lower_check(0.25, 1.0, 1, 1, {32, 64, 128, 256, 512, 1024, 2048}, 200, 11, 4);
  EXPECT_GT(res.cross_checks, 7u);
  ASSERT_TRUE(res.slope_defined);
  EXPECT_GE(res.fitted_slope, -0.65);
  EXPECT_LE(res.fitted_slope, -0.35);
  EXPECT_DOUBLE_EQ(res.reference_value, 0.375);
  EXPECT_DOUBLE_EQ(res.predicted_slope, -0.5);
  EXPECT_GT(res.slope_ci_halfwidth, 0.0);
}

TEST(RateExperiment, LowerCheckSlopeWindow) {
  auto res = empirical_lower_check(0.25, 1.0, 1, 1, {64, 128, 256, 512, 1024, 2048, 4096}, 500, 12, 4, 0.002);
  ASSERT_TRUE(res.slope_defined);
  EXPECT_GE(res.fitted_slope, -0.60);
  EXPECT_LE(res.fitted_slope, -0.40);
}

TEST(RateExperiment, FullCrossCheckEveryTrial) {
  auto res = empirical_lower_check(0.25, 3.0, 1, 2, {4, 16}, 10, 13, 1, 1.0);
  EXPECT_EQ(res.cross_checks, 20u);
}

TEST(RateExperiment, DeterministicAcrossThreadCounts) {
  RateExperiment e;
  e.dist_x = e.dist_y = DistributionSpec::uniform_cube(1, 1.0);
  e.n_grid = {4, 8};
  e.trials = 6;
  e.seed = 99;
  e.solver.restarts = 2;
  auto a = run_rate_experiment(e);
  e.threads = 3;
  auto b = run_rate_experiment(e);
  EXPECT_EQ(a.per_n_errors, b.per_n_errors);
  EXPECT_EQ(a.fitted_slope, b.fitted_slope);
  EXPECT_EQ(a.slope_ci_halfwidth, b.slope_ci_halfwidth);
  e.seed = 100;
  EXPECT_NE(run_rate_experiment(e).per_n_errors, a.per_n_errors);
}

TEST(RateExperiment, TranslationInvariance) {
  RateExperiment e;
  e.dist_x = e.dist_y = DistributionSpec::uniform_ball(2, 1.0);
  e.n_grid = {3, 6};
  e.trials = 4;
  e.solver.restarts = 2;
  auto base = run_rate_experiment(e);
  e.offset_x = {5.0, -1.0};
  e.offset_y = {-2.0, 0.5};
  auto moved = run_rate_experiment(e);
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t t = 0; t < 4; ++t)
      EXPECT_NEAR(moved.per_n_errors[g][t], base.per_n_errors[g][t], 1e-9 * std::max(1.0, base.per_n_errors[g][t]));
  RateExperiment tp;
  tp.dist_x = DistributionSpec::two_point(1, 2.0, 0.25);
  tp.dist_y = DistributionSpec::point_mass(1);
  tp.reference = Reference::ClosedForm;
  tp.n_grid = {8, 32};
  tp.trials = 20;
  auto b2 = run_rate_experiment(tp);
  tp.offset_x = {0.3};
  tp.offset_y = {-7.0};
  tp.cross_check_fraction = 1.0;
  EXPECT_EQ(run_rate_experiment(tp).per_n_errors, b2.per_n_errors);
}

TEST(RateExperiment, SelfZeroCubeDecreases) {
  RateExperiment e;
  e.dist_x = e.dist_y = DistributionSpec::uniform_cube(1, 1.0);
  e.n_grid = {4, 8, 16, 32, 64};
  e.trials = 20;
  e.seed = 5;
  e.solver.restarts = 3;
  e.threads = 4;
  auto res = run_rate_experiment(e);
  EXPECT_LE(res.spearman, -0.8);
  for (const auto& v : res.per_n_errors)
    for (double x : v) EXPECT_GE(x, 0.0);
}

TEST(RateExperiment, HighNReferenceFlagged) {
  RateExperiment e;
  e.dist_x = DistributionSpec::two_point(1, 1.0, 0.5);
  e.dist_y = DistributionSpec::point_mass(1);
  e.reference = Reference::HighNEstimate;
  e.n_grid = {2, 4};
  e.trials = 3;
  auto res = run_rate_experiment(e);
  EXPECT_TRUE(res.reference_is_estimate);
  EXPECT_NEAR(res.reference_value, 0.5, 0.05);
}

TEST(MarginalRate, PointMassIsZero) {
  auto res = marginal_rate_experiment(1, 1, DistributionSpec::point_mass(2), DistributionSpec::point_mass(1), {4, 8}, 5, 1);
  for (const auto& v : res.per_n_errors)
    for (double x : v) EXPECT_EQ(x, 0.0);
  EXPECT_FALSE(res.slope_defined);
}

TEST(MarginalRate, TwoPointSlope) {
  auto res = marginal_rate_experiment(1, 1, DistributionSpec::two_point(1, 1.0, 0.25), DistributionSpec::point_mass(1),
                                      {32, 64, 128, 256, 512, 1024, 2048}, 200, 21, 4);
  ASSERT_TRUE(res.slope_defined);
  EXPECT_GE(res.fitted_slope, -0.65);
  EXPECT_LE(res.fitted_slope, -0.35);
  EXPECT_NEAR(res.reference_value, 0.375, 1e-12);
}

TEST(MarginalRate, CubeAgainstBall) {
  auto res = marginal_rate_experiment(1, 1, DistributionSpec::uniform_cube(2, 1.0), DistributionSpec::uniform_ball(1, 1.0),
                                      {32, 128, 512, 2048}, 100, 22, 4);
  ASSERT_TRUE(res.slope_defined);
  EXPECT_LT(res.fitted_slope, -0.3);
}

TEST(MomentRate, CubeSecondMoment) {
  auto res = moment_rate_experiment(DistributionSpec::uniform_cube(2, 1.0), MultiIndex({2, 0}),
                                    {32, 64, 128, 256, 512, 1024, 2048}, 200, 23, 4);
  EXPECT_NEAR(res.reference_value, 1.0 / 3.0, 1e-15);
  ASSERT_TRUE(res.slope_defined);
  EXPECT_GE(res.fitted_slope, -0.65);
  EXPECT_LE(res.fitted_slope, -0.35);
}
