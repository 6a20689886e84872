#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "evengw/jacobi.hpp"
#include "evengw/random.hpp"

using namespace evengw;

namespace {

SquareMatrix random_symmetric(Rng& rng, std::size_t n) {
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-1, 1);
  return m;
}

double reconstruction_error(const SquareMatrix& c, const SymmetricEigen& e) {
  const std::size_t n = c.n;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      for (std::size_t t = 0; t < n; ++t) v += e.vectors(t, i) * e.values[t] * e.vectors(t, j);
      s += (v - c(i, j)) * (v - c(i, j));
    }
  return std::sqrt(s);
}

double orthogonality_error(const SquareMatrix& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.n; ++i)
    for (std::size_t j = 0; j < u.n; ++j) {
      double v = 0.0;
      for (std::size_t t = 0; t < u.n; ++t) v += u(i, t) * u(j, t);
      v -= (i == j);
      s += v * v;
    }
  return std::sqrt(s);
}

}  // namespace

TEST(Jacobi, Diagonal) {
  SquareMatrix c(2);
  c(0, 0) = 2;
  c(1, 1) = -3;
  auto e = jacobi_eigen(c);
  EXPECT_DOUBLE_EQ(e.values[0], 2.0);
  EXPECT_DOUBLE_EQ(e.values[1], -3.0);
  EXPECT_EQ(e.sweeps, 0u);
}

TEST(Jacobi, Swap) {
  SquareMatrix c(2);
  c(0, 1) = c(1, 0) = 1;
  auto e = jacobi_eigen(c);
  auto vals = e.values;
  std::sort(vals.begin(), vals.end());
  EXPECT_NEAR(vals[0], -1.0, 1e-15);
  EXPECT_NEAR(vals[1], 1.0, 1e-15);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(std::abs(e.vectors(i, 0)), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(e.vectors(i, 1)), 1 / std::sqrt(2.0), 1e-15);
  }
  EXPECT_LT(orthogonality_error(e.vectors), 1e-15);
}

TEST(Jacobi, RandomReconstruction) {
  Rng rng(20);
  for (std::size_t n : {1u, 3u, 20u, 60u}) {
    auto c = random_symmetric(rng, n);
    auto e = jacobi_eigen(c);
    EXPECT_LE(reconstruction_error(c, e), 1e-10 * c.frobenius()) << n;
    EXPECT_LE(orthogonality_error(e.vectors), 1e-10) << n;
  }
}

TEST(Jacobi, AgreesWithEigenSolver) {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 5 + rep;
    auto c = random_symmetric(rng, n);
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = c(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(m);
    auto vals = jacobi_eigen(c).values;
    std::sort(vals.begin(), vals.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(vals[i], ref.eigenvalues()(static_cast<Eigen::Index>(i)), 1e-11);
  }
}

TEST(Jacobi, RepeatedEigenvalues) {
  SquareMatrix c(4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) c(i, j) = 1.0;
  auto e = jacobi_eigen(c);
  auto vals = e.values;
  std::sort(vals.begin(), vals.end());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(vals[i], 0.0, 1e-14);
  EXPECT_NEAR(vals[3], 4.0, 1e-14);
  EXPECT_LE(reconstruction_error(c, e), 1e-13);
}

TEST(Jacobi, ReadsUpperTriangleOnly) {
  SquareMatrix c(2);
  c(0, 1) = 1.0;
  c(1, 0) = 123.0;
  auto vals = jacobi_eigen(c).values;
  std::sort(vals.begin(), vals.end());
  EXPECT_NEAR(vals[0], -1.0, 1e-15);
}

TEST(Jacobi, SweepCap) {
  Rng rng(3);
  JacobiOptions opt;
  opt.max_sweeps = 1;
  EXPECT_THROW(jacobi_eigen(random_symmetric(rng, 30), opt), SolverError);
}
