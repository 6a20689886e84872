#ifndef EVENGW_MULTI_INDEX_HPP
#define EVENGW_MULTI_INDEX_HPP

#include <algorithm>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

namespace evengw {

/// Exponent vector alpha of a monomial z^alpha = prod_j z_j^{alpha_j}.
struct MultiIndex {
  std::vector<int> components;

  MultiIndex() = default;
  explicit MultiIndex(std::size_t dim) : components(dim, 0) {}
  explicit MultiIndex(std::vector<int> c) : components(std::move(c)) {}
  MultiIndex(std::initializer_list<int> c) : components(c) {}

  std::size_t dim() const noexcept { return components.size(); }
  int order() const noexcept { return std::accumulate(components.begin(), components.end(), 0); }
  bool is_zero() const noexcept {
    for (int c : components)
      if (c != 0) return false;
    return true;
  }
  int operator[](std::size_t i) const { return components[i]; }
  int& operator[](std::size_t i) { return components[i]; }

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex out(a.components);
    for (std::size_t i = 0; i < out.dim(); ++i) out.components[i] += b.components[i];
    return out;
  }
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
};

inline double int_pow(double base, int e) {
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

/// z^alpha. Components are assumed to match in length.
inline double monomial(std::span<const double> z, const MultiIndex& alpha) {
  double r = 1.0;
  for (std::size_t j = 0; j < alpha.dim(); ++j)
    if (alpha.components[j] != 0) r *= int_pow(z[j], alpha.components[j]);
  return r;
}

/// All multi-indices over `dim` coordinates with order exactly `order`, lexicographic.
inline std::vector<MultiIndex> multi_indices_of_order(std::size_t dim, int order) {
  std::vector<MultiIndex> out;
  MultiIndex cur(dim);
  auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
    if (pos + 1 == dim) {
      cur.components[pos] = left;
      out.push_back(cur);
      return;
    }
    for (int v = left; v >= 0; --v) {
      cur.components[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  if (dim == 0) return out;
  rec(rec, 0, order);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace evengw

#endif  // EVENGW_MULTI_INDEX_HPP
