#ifndef EVENGW_JACOBI_HPP
#define EVENGW_JACOBI_HPP

// Cyclic Jacobi eigenvalue iteration for dense symmetric matrices.

#include <cmath>
#include <string>
#include <vector>

#include "evengw/error.hpp"

namespace evengw {

/// Dense row-major square matrix.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  double frobenius() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }
  double off_diagonal_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  }
};

/// C = U^T diag(values) U; row i of `vectors` is the unit eigenvector for values[i].
struct SymmetricEigen {
  std::vector<double> values;
  SquareMatrix vectors;
  std::size_t sweeps = 0;
};

struct JacobiOptions {
  double relative_tolerance = 1e-12;
  std::size_t max_sweeps = 100;
};

/// Full spectral decomposition of a symmetric matrix. Only the upper triangle is read.
/// Iterates until the off-diagonal Frobenius mass is below tol * |C|_F.
inline SymmetricEigen jacobi_eigen(SquareMatrix m, const JacobiOptions& opt = {}) {
  const std::size_t n = m.n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);

  SymmetricEigen out;
  out.vectors = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i) out.vectors(i, i) = 1.0;

  const double target = opt.relative_tolerance * m.frobenius();
  std::size_t sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    if (m.off_diagonal_norm() <= target) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double app = m(p, p), aqq = m(q, q);
        // Skip rotations that cannot change the diagonal in floating point.
        if (sweep > 3 && std::abs(apq) * 1e18 < std::abs(app) && std::abs(apq) * 1e18 < std::abs(aqq)) {
          m(p, q) = m(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        double* rp = &m.a[p * n];
        double* rq = &m.a[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = rp[k], akq = rq[k];
          const double np = c * akp - s * akq;
          const double nq = s * akp + c * akq;
          rp[k] = np;
          rq[k] = nq;
          m.a[k * n + p] = np;
          m.a[k * n + q] = nq;
        }
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = rq[p] = 0.0;
        double* up = &out.vectors.a[p * n];
        double* uq = &out.vectors.a[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          const double a = up[k], b = uq[k];
          up[k] = c * a - s * b;
          uq[k] = s * a + c * b;
        }
      }
    }
  }
  if (m.off_diagonal_norm() > target)
    throw SolverError("Jacobi iteration did not converge after " + std::to_string(opt.max_sweeps) +
                      " sweeps on a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  out.sweeps = sweep;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = m(i, i);
  return out;
}

}  // namespace evengw

#endif  // EVENGW_JACOBI_HPP
