#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "evengw/dual_construct.hpp"
#include "evengw/gw_solve.hpp"
#include "oracles.hpp"

using namespace evengw;

namespace {

QuadraticForm synthetic_form(std::size_t size, const std::vector<SparseEntry>& upper) {
  auto basis = std::make_shared<MixedBasis>();
  basis->d_x = basis->d_y = 1;
  basis->max_degree = 2;
  for (std::size_t i = 0; i < size; ++i) basis->entries.push_back({MultiIndex({static_cast<int>(i)}), MultiIndex({0})});
  basis->rebuild_index();
  QuadraticForm q;
  q.basis = basis;
  q.upper = upper;
  return q;
}

std::vector<double> signed_integrals(const DualCostFamily& fam, const std::vector<double>& design, std::size_t cells,
                                     const Coupling& pi) {
  const auto vals = polynomial_values(*fam.polys, design, cells);
  std::vector<double> m(fam.J(), 0.0);
  for (std::size_t i = 0; i < fam.J(); ++i)
    for (std::size_t c = 0; c < cells; ++c) m[i] += vals[i * cells + c] * pi.mass[c];
  return m;
}

double signed_sum(const DualCostFamily& fam, const std::vector<double>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += (i < fam.ell() ? 1.0 : -1.0) * m[i] * m[i];
  return s;
}

}  // namespace

TEST(QuadraticForm, SmallestBasisContents) {
  auto exp = expand_kernel(1, 1, 1, 1);
  auto q = build_quadratic_form(exp);
  const auto& b = *q.basis;
  EXPECT_EQ(b.entries.front(), (std::pair{MultiIndex({0}), MultiIndex({0})}));
  EXPECT_NO_THROW(b.index_of(MultiIndex({1}), MultiIndex({1})));
  // Every non-constant entry is a factor of some coupling term.
  for (std::size_t j = 1; j < b.size(); ++j) {
    bool found = false;
    for (const auto& t : exp.terms)
      if (!t.marginal_only)
        found = found || std::pair{t.alpha, t.gamma} == b.entries[j] || std::pair{t.beta, t.delta} == b.entries[j];
    EXPECT_TRUE(found) << j;
  }
  // Cross term -2|x-x'|^2|y-y'|^2 contributes 8 x y x' y' -> C[(1,1),(1,1)] = 8.
  const auto j11 = b.index_of(MultiIndex({1}), MultiIndex({1}));
  EXPECT_DOUBLE_EQ(q.entry(j11, j11), -2.0 * -2.0 * -2.0);
}

TEST(QuadraticForm, MatchesCouplingValue) {
  Rng rng(1);
  for (auto [r, k, dx, dy] : {std::tuple{1, 1, 1, 1}, std::tuple{1, 1, 2, 3}, std::tuple{2, 1, 2, 1},
                              std::tuple{1, 2, 1, 2}, std::tuple{2, 2, 1, 1}}) {
    auto exp = cached_expansion(r, k, dx, dy);
    auto q = build_quadratic_form(*exp);
    for (int rep = 0; rep < 100; ++rep) {
      auto mu = testing_oracles::random_measure(rng, dx, 1 + rep % 4);
      auto nu = testing_oracles::random_measure(rng, dy, 1 + rep % 3);
      auto pi = testing_oracles::random_coupling(rng, mu.weights(), nu.weights());
      const auto design = basis_design_matrix(*q.basis, mu.atoms(), nu.atoms());
      const double direct = coupling_value_direct(*exp, mu, nu, pi);
      const double form = q.value(moment_vector(design, q.size(), pi));
      EXPECT_NEAR(form, direct, 1e-9 * std::max(1.0, std::abs(direct))) << config_name(r, k, dx, dy);
    }
  }
}

TEST(QuadraticForm, OriginProductIsZero) {
  auto exp = expand_kernel(1, 1, 2, 2);
  auto q = build_quadratic_form(exp);
  const std::vector<Point> origin{{0.0, 0.0}};
  const auto design = basis_design_matrix(*q.basis, origin, origin);
  Coupling pi(1, 1);
  pi(0, 0) = 1;
  const auto u = moment_vector(design, q.size(), pi);
  EXPECT_EQ(u[0], 1.0);
  for (std::size_t j = 1; j < u.size(); ++j) EXPECT_EQ(u[j], 0.0);
  EXPECT_EQ(q.value(u), 0.0);
}

TEST(QuadraticForm, BasisCap) {
  FormOptions opt;
  opt.basis_cap = 3;
  EXPECT_THROW(build_quadratic_form(expand_kernel(1, 1, 2, 2), opt), CapExceeded);
}

TEST(Eigendecompose, DiagonalExample) {
  auto q = synthetic_form(2, {{0, 0, 2.0}, {1, 1, -3.0}});
  auto s = eigendecompose(q);
  ASSERT_EQ(s.eigvals.size(), 2u);
  EXPECT_EQ(s.ell, 1u);
  EXPECT_DOUBLE_EQ(s.eigvals[0], 2.0);
  EXPECT_DOUBLE_EQ(s.eigvals[1], -3.0);
  EXPECT_EQ(s.block_count, 2u);
}

TEST(Eigendecompose, OffDiagonalExample) {
  auto q = synthetic_form(2, {{0, 1, 1.0}});
  auto s = eigendecompose(q);
  ASSERT_EQ(s.eigvals.size(), 2u);
  EXPECT_EQ(s.ell, 1u);
  EXPECT_NEAR(s.eigvals[0], 1.0, 1e-15);
  EXPECT_NEAR(s.eigvals[1], -1.0, 1e-15);
  const double h = 1 / std::sqrt(2.0);
  ASSERT_EQ(s.eigvecs[0].size(), 2u);
  EXPECT_NEAR(s.eigvecs[0][0].second, h, 1e-15);
  EXPECT_NEAR(s.eigvecs[0][1].second, h, 1e-15);
  EXPECT_NEAR(s.eigvecs[1][0].second, h, 1e-15);
  EXPECT_NEAR(s.eigvecs[1][1].second, -h, 1e-15);
}

TEST(Eigendecompose, ZeroFormIsEmpty) {
  auto q = synthetic_form(3, {});
  auto s = eigendecompose(q);
  EXPECT_TRUE(s.eigvals.empty());
  EXPECT_EQ(s.ell, 0u);
  EXPECT_EQ(s.dropped, 3u);
  auto sp = std::make_shared<const SignedPolynomials>(signed_polynomials(q, s));
  auto fam = attach_boxes(sp, {{0.0}, {1.0}}, {{0.5}});
  EXPECT_EQ(fam.J(), 0u);
  EXPECT_EQ(cost_eval(fam, {}, {0.3}, {0.2}), 0.0);
}

TEST(Eigendecompose, ReconstructionAndOrthonormality) {
  for (auto [r, k, dx, dy] : {std::tuple{1, 1, 1, 1}, std::tuple{1, 1, 2, 2}, std::tuple{2, 1, 1, 2}}) {
    auto exp = cached_expansion(r, k, dx, dy);
    auto q = build_quadratic_form(*exp);
    auto s = eigendecompose(q, 1e-300);
    const auto dense = q.dense();
    const std::size_t m0 = q.size();
    SquareMatrix rec(m0), gram(s.eigvecs.size());
    for (std::size_t t = 0; t < s.eigvecs.size(); ++t)
      for (const auto& [i, a] : s.eigvecs[t])
        for (const auto& [j, b] : s.eigvecs[t]) rec(i, j) += s.eigvals[t] * a * b;
    double err = 0;
    for (std::size_t i = 0; i < m0; ++i)
      for (std::size_t j = 0; j < m0; ++j) err += std::pow(rec(i, j) - dense(i, j), 2);
    EXPECT_LE(std::sqrt(err), 1e-10 * q.frobenius()) << config_name(r, k, dx, dy);

    std::vector<std::vector<double>> vecs(s.eigvecs.size(), std::vector<double>(m0, 0.0));
    for (std::size_t t = 0; t < vecs.size(); ++t)
      for (const auto& [i, a] : s.eigvecs[t]) vecs[t][i] = a;
    double orth = 0;
    for (std::size_t a = 0; a < vecs.size(); ++a)
      for (std::size_t b = 0; b < vecs.size(); ++b) {
        double d = 0;
        for (std::size_t i = 0; i < m0; ++i) d += vecs[a][i] * vecs[b][i];
        orth += std::pow(d - (a == b), 2);
      }
    EXPECT_LE(std::sqrt(orth), 1e-10);
  }
}

TEST(Eigendecompose, OrderingConvention) {
  auto q = build_quadratic_form(*cached_expansion(1, 2, 2, 1));
  auto s = eigendecompose(q);
  ASSERT_GT(s.ell, 0u);
  ASSERT_LT(s.ell, s.eigvals.size());
  for (std::size_t i = 0; i + 1 < s.eigvals.size(); ++i) {
    if (i + 1 < s.ell) {
      EXPECT_GE(s.eigvals[i], s.eigvals[i + 1]);
    }
    if (i >= s.ell) {
      EXPECT_LE(s.eigvals[i], s.eigvals[i + 1]);
    }
  }
  for (std::size_t i = 0; i < s.eigvals.size(); ++i) EXPECT_EQ(s.eigvals[i] > 0, i < s.ell);
  double max_abs = 0;
  for (double v : s.eigvals) max_abs = std::max(max_abs, std::abs(v));
  for (double v : s.eigvals) EXPECT_GT(std::abs(v), 1e-9 * max_abs);
}

TEST(Eigendecompose, SmallestConfigurationRegression) {
  // Basis {1, x^2y^2, x^2y, xy^2, x, y, xy} by hand; J and ell frozen from the construction.
  auto setup = cached_dual_setup(1, 1, 1, 1);
  EXPECT_EQ(setup.form->size(), 7u);
  EXPECT_EQ(setup.polys->count(), 7u);
  EXPECT_EQ(setup.polys->ell, 3u);
}

TEST(CostFamily, SignedIdentityAndBoxContainment) {
  Rng rng(77);
  for (auto [r, k, dx, dy] : {std::tuple{1, 1, 1, 1}, std::tuple{1, 1, 2, 2}, std::tuple{2, 1, 1, 1},
                              std::tuple{1, 2, 2, 1}, std::tuple{2, 2, 1, 1}}) {
    auto setup = cached_dual_setup(r, k, dx, dy);
    for (int inst = 0; inst < 10; ++inst) {
      auto mu = testing_oracles::random_measure(rng, dx, 2 + inst % 3);
      auto nu = testing_oracles::random_measure(rng, dy, 2 + inst % 2);
      auto fam = attach_boxes(setup.polys, mu.atoms(), nu.atoms());
      const auto design = basis_design_matrix(*setup.form->basis, mu.atoms(), nu.atoms());
      const std::size_t cells = mu.size() * nu.size();
      for (int rep = 0; rep < 10; ++rep) {
        auto pi = testing_oracles::random_coupling(rng, mu.weights(), nu.weights());
        const double q = coupling_value_direct(*setup.expansion, mu, nu, pi);
        const auto m = signed_integrals(fam, design, cells, pi);
        EXPECT_NEAR(signed_sum(fam, m), q, 1e-8 * std::max(1.0, std::abs(q))) << config_name(r, k, dx, dy);
        for (std::size_t i = 0; i < fam.J(); ++i) {
          const double box = i < fam.ell() ? fam.box_plus[i] : fam.box_minus[i - fam.ell()];
          EXPECT_LE(std::abs(m[i]) / 2, box * (1 + 1e-12));
        }
      }
    }
  }
}

TEST(CostFamily, EvaluationBasics) {
  Rng rng(5);
  auto setup = cached_dual_setup(1, 1, 2, 2);
  auto mu = testing_oracles::random_measure(rng, 2, 3);
  auto nu = testing_oracles::random_measure(rng, 2, 3);
  auto fam = attach_boxes(setup.polys, mu.atoms(), nu.atoms());
  CostParams zero{std::vector<double>(fam.ell(), 0.0), std::vector<double>(fam.J() - fam.ell(), 0.0)};
  const Point x = mu.atom(0), y = nu.atom(1);
  EXPECT_EQ(cost_eval(fam, zero, x, y), 0.0);

  const double t = 0.5 * fam.box_plus[0];
  CostParams one = zero;
  one.u[0] = t;
  CostParams unit = zero;
  unit.u[0] = 1.0;
  double p1 = 0.0;
  for (const auto& [idx, c] : fam.polys->polys[0])
    p1 += c * monomial(x, fam.polys->basis->entries[idx].first) * monomial(y, fam.polys->basis->entries[idx].second);
  EXPECT_NEAR(cost_eval(fam, one, x, y), t * p1, 1e-14);

  CostParams neg = zero;
  neg.v[0] = t;
  double pl = 0.0;
  for (const auto& [idx, c] : fam.polys->polys[fam.ell()])
    pl += c * monomial(x, fam.polys->basis->entries[idx].first) * monomial(y, fam.polys->basis->entries[idx].second);
  EXPECT_NEAR(cost_eval(fam, neg, x, y), -t * pl, 1e-14);

  CostParams far = zero;
  far.u[0] = 10 * fam.box_plus[0] + 1;
  EXPECT_THROW(cost_eval(fam, far, x, y, true), InvalidArgument);
  CostParams clamped = zero;
  clamped.u[0] = fam.box_plus[0];
  EXPECT_DOUBLE_EQ(cost_eval(fam, far, x, y), cost_eval(fam, clamped, x, y));
  EXPECT_THROW(cost_eval(fam, CostParams{}, x, y), DimensionMismatch);
}

TEST(CostFamily, ParametricLipschitz) {
  Rng rng(8);
  auto setup = cached_dual_setup(1, 1, 2, 1);
  auto mu = testing_oracles::random_measure(rng, 2, 5);
  auto nu = testing_oracles::random_measure(rng, 1, 4);
  auto fam = attach_boxes(setup.polys, mu.atoms(), nu.atoms());
  const double L = fam.lipschitz_constant();
  auto draw = [&] {
    CostParams th;
    for (double h : fam.box_plus) th.u.push_back(rng.uniform(-h, h));
    for (double h : fam.box_minus) th.v.push_back(rng.uniform(-h, h));
    return th;
  };
  for (int rep = 0; rep < 200; ++rep) {
    auto a = draw(), b = draw();
    const auto ca = cost_matrix(fam, a, mu.atoms(), nu.atoms());
    const auto cb = cost_matrix(fam, b, mu.atoms(), nu.atoms());
    double sup = 0, dist = 0;
    for (std::size_t c = 0; c < ca.data.size(); ++c) sup = std::max(sup, std::abs(ca.data[c] - cb.data[c]));
    for (std::size_t i = 0; i < a.u.size(); ++i) dist += std::pow(a.u[i] - b.u[i], 2);
    for (std::size_t i = 0; i < a.v.size(); ++i) dist += std::pow(a.v[i] - b.v[i], 2);
    EXPECT_LE(sup, L * std::sqrt(dist) + 1e-12);
  }
}
