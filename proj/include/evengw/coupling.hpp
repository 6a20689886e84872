#ifndef EVENGW_COUPLING_HPP
#define EVENGW_COUPLING_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "evengw/error.hpp"

namespace evengw {

/// Dense row-major real matrix (cost matrices, design matrices).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Dense nonnegative n_x-by-n_y matrix, row-major. Marginals are checked on demand.
struct Coupling {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> mass;

  Coupling() = default;
  Coupling(std::size_t r, std::size_t c) : rows(r), cols(c), mass(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return mass[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return mass[i * cols + j]; }

  std::vector<double> row_sums() const {
    std::vector<double> s(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s[i] += (*this)(i, j);
    return s;
  }
  std::vector<double> col_sums() const {
    std::vector<double> s(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s[j] += (*this)(i, j);
    return s;
  }

  /// Largest absolute marginal violation against the given weight vectors.
  double marginal_error(std::span<const double> row_w, std::span<const double> col_w) const {
    if (row_w.size() != rows || col_w.size() != cols)
      throw DimensionMismatch("coupling is " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " but marginals have sizes " + std::to_string(row_w.size()) + " and " +
                              std::to_string(col_w.size()));
    double err = 0.0;
    auto rs = row_sums();
    auto cs = col_sums();
    for (std::size_t i = 0; i < rows; ++i) err = std::max(err, std::abs(rs[i] - row_w[i]));
    for (std::size_t j = 0; j < cols; ++j) err = std::max(err, std::abs(cs[j] - col_w[j]));
    for (double m : mass)
      if (m < 0) err = std::max(err, -m);
    return err;
  }

  static Coupling product(std::span<const double> row_w, std::span<const double> col_w) {
    Coupling c(row_w.size(), col_w.size());
    for (std::size_t i = 0; i < c.rows; ++i)
      for (std::size_t j = 0; j < c.cols; ++j) c(i, j) = row_w[i] * col_w[j];
    return c;
  }
};

}  // namespace evengw

#endif  // EVENGW_COUPLING_HPP
