#include <gtest/gtest.h>

#include <cmath>

#include "evengw/measure.hpp"

using namespace evengw;

TEST(EmpiricalMeasure, UniformWeights) {
  auto m = empirical_from_samples({{0.0}, {1.0}});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.weight(0), 0.5);
  EXPECT_DOUBLE_EQ(m.weight(1), 0.5);
  EXPECT_EQ(m.atom(1), Point{1.0});
}

TEST(EmpiricalMeasure, SingleSample) {
  auto m = empirical_from_samples({{2.0, 3.0}});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_DOUBLE_EQ(m.weight(0), 1.0);
}

TEST(EmpiricalMeasure, DuplicatesStaySeparate) {
  auto m = empirical_from_samples(std::vector<Point>(4, Point{1.0, 1.0}));
  ASSERT_EQ(m.size(), 4u);
  double total = 0;
  for (double w : m.weights()) {
    EXPECT_DOUBLE_EQ(w, 0.25);
    total += w;
  }
  EXPECT_DOUBLE_EQ(total, 1.0);

  std::vector<std::size_t> owner;
  auto merged = merge_duplicates(m, &owner);
  EXPECT_EQ(merged.size(), 1u);
  EXPECT_DOUBLE_EQ(merged.weight(0), 1.0);
  EXPECT_EQ(owner, (std::vector<std::size_t>{0, 0, 0, 0}));
}

TEST(EmpiricalMeasure, Errors) {
  EXPECT_THROW(empirical_from_samples({}), InvalidArgument);
  EXPECT_THROW(empirical_from_samples({{0.0}, {1.0, 2.0}}), DimensionMismatch);
}

TEST(DiscreteMeasure, RejectsBadWeights) {
  EXPECT_THROW(DiscreteMeasure(1, {{0.0}, {1.0}}, {0.6, 0.6}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure(1, {{0.0}, {1.0}}, {1.5, -0.5}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure(1, {{0.0}}, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure(2, {{0.0}}, {1.0}), DimensionMismatch);
}

TEST(Center, TwoAtoms) {
  auto [c, rec] = center(empirical_from_samples({{0.0}, {1.0}}));
  EXPECT_DOUBLE_EQ(c.atom(0)[0], -0.5);
  EXPECT_DOUBLE_EQ(c.atom(1)[0], 0.5);
  EXPECT_DOUBLE_EQ(rec.shift[0], 0.5);
  EXPECT_DOUBLE_EQ(rec.scale, 1.0);
}

TEST(Center, SingleAtom) {
  auto [c, rec] = center(empirical_from_samples({{5.0, 5.0}}));
  EXPECT_EQ(c.atom(0), (Point{0.0, 0.0}));
  EXPECT_EQ(rec.shift, (Point{5.0, 5.0}));
}

TEST(Center, MeanOne) {
  auto [c, rec] = center(empirical_from_samples({{0.0}, {0.0}, {3.0}}));
  EXPECT_NEAR(rec.shift[0], 1.0, 1e-15);
  EXPECT_NEAR(c.atom(0)[0], -1.0, 1e-15);
  EXPECT_NEAR(c.atom(1)[0], -1.0, 1e-15);
  EXPECT_NEAR(c.atom(2)[0], 2.0, 1e-15);
}

TEST(Center, IdempotentAndInvertible) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto m = sample(DistributionSpec::uniform_cube(3, 4.0), 7, seed).transformed(1.0, {10.0, -3.0, 0.5});
    auto [c1, r1] = center(m);
    auto [c2, r2] = center(c1);
    for (double s : c1.mean()) EXPECT_NEAR(s, 0.0, 1e-12);
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c2.atom(i)[j], c1.atom(i)[j], 1e-12);
      const Point back = r1.to_original(c1.atom(i));
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[j], m.atom(i)[j], 1e-12);
    }
  }
}

TEST(NormalizePair, ScalesByTwiceDiameter) {
  auto mu = empirical_from_samples({{0.0}, {2.0}});
  auto nu = empirical_from_samples({{0.0}});
  auto np = normalize_pair(mu, nu);
  EXPECT_FALSE(np.degenerate);
  EXPECT_DOUBLE_EQ(np.radius(), 2.0);
  EXPECT_DOUBLE_EQ(np.mu_record.scale, 4.0);
  EXPECT_DOUBLE_EQ(np.mu.atom(0)[0], -0.25);
  EXPECT_DOUBLE_EQ(np.mu.atom(1)[0], 0.25);
}

TEST(NormalizePair, DegenerateSingletons) {
  auto d = empirical_from_samples({{0.0}});
  auto np = normalize_pair(d, d);
  EXPECT_TRUE(np.degenerate);
  EXPECT_DOUBLE_EQ(np.mu_record.scale, 1.0);
  EXPECT_EQ(np.mu.atom(0), Point{0.0});
  EXPECT_EQ(np.nu.atom(0), Point{0.0});
}

TEST(NormalizePair, Symmetric) {
  auto m = empirical_from_samples({{-1.0}, {1.0}});
  auto np = normalize_pair(m, m);
  EXPECT_DOUBLE_EQ(np.radius(), 2.0);
  for (const auto* side : {&np.mu, &np.nu}) {
    EXPECT_DOUBLE_EQ(side->atom(0)[0], -0.25);
    EXPECT_DOUBLE_EQ(side->atom(1)[0], 0.25);
  }
}

TEST(NormalizePair, OutputsCenteredInUnitBall) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto mu = sample(DistributionSpec::uniform_ball(2, 3.0), 9, seed).transformed(2.0, {1.0, -5.0});
    auto nu = sample(DistributionSpec::uniform_cube(4, 0.1), 5, seed + 100);
    auto np = normalize_pair(mu, nu);
    for (const auto* m : {&np.mu, &np.nu}) {
      for (double s : m->mean()) EXPECT_NEAR(s, 0.0, 1e-12);
      for (const auto& a : m->atoms()) EXPECT_LE(std::sqrt(squared_distance(a, Point(a.size(), 0.0))), 1.0 + 1e-12);
    }
  }
}

TEST(Moment, HandValues) {
  auto sym = empirical_from_samples({{-1.0}, {1.0}});
  EXPECT_DOUBLE_EQ(moment(sym, MultiIndex({1})), 0.0);
  EXPECT_DOUBLE_EQ(moment(sym, MultiIndex({2})), 1.0);
  auto three = empirical_from_samples({{0.0}, {1.0}, {2.0}});
  EXPECT_NEAR(moment(three, MultiIndex({3})), 3.0, 1e-15);
  EXPECT_THROW(moment(three, MultiIndex({1, 1})), DimensionMismatch);
}

TEST(Moment, BoundedInUnitBall) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = sample(DistributionSpec::uniform_ball(3, 1.0), 20, seed);
    for (int order = 0; order <= 8; ++order)
      for (const auto& a : multi_indices_of_order(3, order)) EXPECT_LE(std::abs(moment(m, a)), 1.0 + 1e-15);
  }
}

TEST(Sample, TwoPointCertain) {
  auto m = sample(DistributionSpec::two_point(1, 1.0, 1.0), 17, 12345);
  for (const auto& a : m.atoms()) EXPECT_EQ(a, Point{1.0});
}

TEST(Sample, PointMass) {
  auto m = sample(DistributionSpec::point_mass(3), 5, 9);
  ASSERT_EQ(m.size(), 5u);
  for (const auto& a : m.atoms()) EXPECT_EQ(a, (Point{0.0, 0.0, 0.0}));
}

TEST(Sample, TwoPointFrequency) {
  auto m = sample(DistributionSpec::two_point(2, 1.0, 0.25), 10'000, 2024);
  std::size_t far = 0;
  for (const auto& a : m.atoms()) far += a[0] == 1.0;
  EXPECT_NEAR(static_cast<double>(far) / 10'000.0, 0.25, 0.02);
}

TEST(Sample, Deterministic) {
  for (auto spec : {DistributionSpec::uniform_ball(4, 2.0), DistributionSpec::uniform_cube(2, 1.0),
                    DistributionSpec::two_point(3, 2.0, 0.3)}) {
    auto a = sample(spec, 50, 77), b = sample(spec, 50, 77), c = sample(spec, 50, 78);
    EXPECT_EQ(a.atoms(), b.atoms());
    EXPECT_NE(a.atoms(), c.atoms());
  }
}

TEST(Sample, UniformBallStaysInside) {
  auto m = sample(DistributionSpec::uniform_ball(5, 2.0), 2000, 3);
  for (const auto& a : m.atoms()) EXPECT_LE(squared_distance(a, Point(5, 0.0)), 4.0 + 1e-12);
}

TEST(Sample, Errors) {
  EXPECT_THROW(sample(DistributionSpec::point_mass(1), 0, 1), InvalidArgument);
  EXPECT_THROW(DistributionSpec::parse("gaussian:2"), InvalidArgument);
  EXPECT_THROW(DistributionSpec::parse("two-point:1:1"), InvalidArgument);
  EXPECT_THROW(DistributionSpec::parse("uniform-cube:0:1"), InvalidArgument);
}

TEST(DistributionSpec, ParseRoundTrip) {
  for (const char* s : {"uniform-ball:3:1.5", "uniform-cube:5:0.5", "two-point:2:3:0.25", "point-mass:4"}) {
    auto spec = DistributionSpec::parse(s);
    EXPECT_EQ(DistributionSpec::parse(spec.to_string()).to_string(), spec.to_string());
  }
  auto tp = DistributionSpec::parse("two-point:2:3:0.25");
  EXPECT_EQ(tp.kind, DistributionSpec::Kind::TwoPoint);
  EXPECT_EQ(tp.dim, 2u);
  EXPECT_DOUBLE_EQ(tp.scale, 3.0);
  EXPECT_DOUBLE_EQ(tp.p, 0.25);
}
