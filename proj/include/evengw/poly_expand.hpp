#ifndef EVENGW_POLY_EXPAND_HPP
#define EVENGW_POLY_EXPAND_HPP

// Monomial expansion of the kernel (|x-x'|^{2k} - |y-y'|^{2k})^{2r}.
//
// Every term of the expansion is coeff * x^alpha x'^beta y^gamma y'^delta.
// Integrated against pi (x) pi it becomes coeff * M_{alpha,gamma}(pi) * M_{beta,delta}(pi)
// with mixed moments M_{a,g}(pi) = sum_ij pi_ij x_i^a y_j^g. A term is marginal-only
// when both factors depend on a single marginal:
//   (alpha == 0 or gamma == 0) and (beta == 0 or delta == 0).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "evengw/coupling.hpp"
#include "evengw/error.hpp"
#include "evengw/measure.hpp"
#include "evengw/multi_index.hpp"

namespace evengw {

using ExactInt = __int128;

namespace detail {

inline ExactInt checked_mul(ExactInt a, ExactInt b) {
  ExactInt r;
  if (__builtin_mul_overflow(a, b, &r)) throw CapExceeded("kernel coefficient overflows 128-bit arithmetic");
  return r;
}
inline ExactInt checked_add(ExactInt a, ExactInt b) {
  ExactInt r;
  if (__builtin_add_overflow(a, b, &r)) throw CapExceeded("kernel coefficient overflows 128-bit arithmetic");
  return r;
}

inline ExactInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  ExactInt r = 1;
  for (int i = 1; i <= k; ++i) r = checked_mul(r, n - k + i) / i;
  return r;
}

}  // namespace detail

/// Sparse table {(alpha, beta) -> coefficient} of a polynomial in (z, z').
template <typename Coeff>
using PairTable = std::map<std::pair<MultiIndex, MultiIndex>, Coeff>;

/// |z - z'|^2 in d coordinates.
inline PairTable<ExactInt> squared_norm_table(std::size_t d) {
  PairTable<ExactInt> t;
  for (std::size_t c = 0; c < d; ++c) {
    const std::tuple<int, int, int> parts[] = {{2, 0, 1}, {1, 1, -2}, {0, 2, 1}};
    for (auto [a, b, coef] : parts) {
      MultiIndex al(d), be(d);
      al[c] = a;
      be[c] = b;
      t[{al, be}] = detail::checked_add(t[{al, be}], coef);
    }
  }
  return t;
}

inline PairTable<ExactInt> convolve(const PairTable<ExactInt>& lhs, const PairTable<ExactInt>& rhs) {
  PairTable<ExactInt> out;
  for (const auto& [k1, c1] : lhs)
    for (const auto& [k2, c2] : rhs) {
      auto& slot = out[{k1.first + k2.first, k1.second + k2.second}];
      slot = detail::checked_add(slot, detail::checked_mul(c1, c2));
    }
  std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
  return out;
}

/// Exact tables of |z - z'|^{2e} for e = 0..max_power, each by one more convolution
/// with the e = 1 table.
inline std::vector<PairTable<ExactInt>> norm_power_tables(std::size_t d, int max_power) {
  std::vector<PairTable<ExactInt>> out;
  PairTable<ExactInt> one;
  one[{MultiIndex(d), MultiIndex(d)}] = 1;
  out.push_back(std::move(one));
  const auto base = squared_norm_table(d);
  for (int e = 1; e <= max_power; ++e) out.push_back(convolve(out.back(), base));
  return out;
}

/// Coefficients of |x - x'|^{2k} in the monomials x^alpha x'^beta.
inline PairTable<double> expand_norm_power(std::size_t d, int k) {
  if (d == 0 || k < 1) throw InvalidArgument("expand_norm_power needs d >= 1 and k >= 1");
  auto tables = norm_power_tables(d, k);
  PairTable<double> out;
  for (const auto& [key, c] : tables[static_cast<std::size_t>(k)]) out[key] = static_cast<double>(c);
  return out;
}

struct KernelTerm {
  int s = 0;
  MultiIndex alpha, beta, gamma, delta;
  double coeff = 0.0;
  bool marginal_only = false;
  /// Indices into KernelExpansion::factors of (alpha, gamma) and (beta, delta).
  std::size_t first_factor = 0;
  std::size_t second_factor = 0;

  int degree() const { return alpha.order() + beta.order() + gamma.order() + delta.order(); }
};

inline bool is_marginal_only(const MultiIndex& alpha, const MultiIndex& beta, const MultiIndex& gamma,
                             const MultiIndex& delta) {
  return (alpha.is_zero() || gamma.is_zero()) && (beta.is_zero() || delta.is_zero());
}

struct ExpansionOptions {
  std::size_t term_cap = 2'000'000;
};

struct KernelExpansion {
  int r = 0, k = 0;
  std::size_t d_x = 0, d_y = 0;
  /// Ordered lexicographically on (s, alpha, beta, gamma, delta).
  std::vector<KernelTerm> terms;
  /// Distinct mixed-moment factors (alpha, gamma), sorted.
  std::vector<std::pair<MultiIndex, MultiIndex>> factors;

  int max_degree() const { return 4 * k * r; }
  std::size_t marginal_term_count() const {
    return static_cast<std::size_t>(std::count_if(terms.begin(), terms.end(), [](const auto& t) { return t.marginal_only; }));
  }
};

inline std::string config_name(int r, int k, std::size_t dx, std::size_t dy) {
  return "(r,k,d_x,d_y)=(" + std::to_string(r) + "," + std::to_string(k) + "," + std::to_string(dx) + "," +
         std::to_string(dy) + ")";
}

inline KernelExpansion expand_kernel(int r, int k, std::size_t d_x, std::size_t d_y, const ExpansionOptions& opt = {}) {
  if (r < 1 || k < 1) throw InvalidArgument("expand_kernel needs r >= 1 and k >= 1");
  if (d_x < 1 || d_y < 1) throw InvalidArgument("expand_kernel needs positive dimensions");
  const int top = 2 * r * k;
  auto px = norm_power_tables(d_x, top);
  auto qy = d_x == d_y ? px : norm_power_tables(d_y, top);

  std::size_t count = 0;
  for (int s = 0; s <= 2 * r; ++s) count += px[s * k].size() * qy[(2 * r - s) * k].size();
  if (count > opt.term_cap)
    throw CapExceeded("kernel expansion for " + config_name(r, k, d_x, d_y) + " needs " + std::to_string(count) +
                      " terms, above the term cap of " + std::to_string(opt.term_cap));

  KernelExpansion exp;
  exp.r = r;
  exp.k = k;
  exp.d_x = d_x;
  exp.d_y = d_y;
  exp.terms.reserve(count);
  std::map<std::pair<MultiIndex, MultiIndex>, std::size_t> factor_ids;
  for (int s = 0; s <= 2 * r; ++s) {
    const ExactInt layer = (s % 2 == 0 ? 1 : -1) * detail::binomial(2 * r, s);
    for (const auto& [ab, p] : px[s * k]) {
      const ExactInt lp = detail::checked_mul(layer, p);
      for (const auto& [gd, q] : qy[(2 * r - s) * k]) {
        KernelTerm t;
        t.s = s;
        t.alpha = ab.first;
        t.beta = ab.second;
        t.gamma = gd.first;
        t.delta = gd.second;
        t.coeff = static_cast<double>(detail::checked_mul(lp, q));
        t.marginal_only = is_marginal_only(t.alpha, t.beta, t.gamma, t.delta);
        factor_ids.try_emplace({t.alpha, t.gamma}, 0);
        factor_ids.try_emplace({t.beta, t.delta}, 0);
        exp.terms.push_back(std::move(t));
      }
    }
  }
  exp.factors.reserve(factor_ids.size());
  for (auto& [key, id] : factor_ids) {
    id = exp.factors.size();
    exp.factors.push_back(key);
  }
  for (auto& t : exp.terms) {
    t.first_factor = factor_ids.at({t.alpha, t.gamma});
    t.second_factor = factor_ids.at({t.beta, t.delta});
  }
  return exp;
}

/// Process-wide cache of expansions keyed by (r, k, d_x, d_y, cap).
inline std::shared_ptr<const KernelExpansion> cached_expansion(int r, int k, std::size_t d_x, std::size_t d_y,
                                                               const ExpansionOptions& opt = {}) {
  using Key = std::tuple<int, int, std::size_t, std::size_t, std::size_t>;
  static std::mutex mtx;
  static std::map<Key, std::shared_ptr<const KernelExpansion>> cache;
  const Key key{r, k, d_x, d_y, opt.term_cap};
  {
    std::lock_guard lock(mtx);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const KernelExpansion>(expand_kernel(r, k, d_x, d_y, opt));
  std::lock_guard lock(mtx);
  return cache.try_emplace(key, std::move(built)).first->second;
}

/// Direct kernel value (|x-x'|^{2k} - |y-y'|^{2k})^{2r}.
inline double kernel_value(const Point& x, const Point& xp, const Point& y, const Point& yp, int r, int k) {
  const double kx = int_pow(squared_distance(x, xp), k);
  const double ky = int_pow(squared_distance(y, yp), k);
  return int_pow(kx - ky, 2 * r);
}

/// Sum of the expansion's terms at (x, x', y, y').
inline double evaluate_expansion(const KernelExpansion& exp, const Point& x, const Point& xp, const Point& y,
                                 const Point& yp) {
  double s = 0.0;
  for (const auto& t : exp.terms)
    s += t.coeff * monomial(x, t.alpha) * monomial(xp, t.beta) * monomial(y, t.gamma) * monomial(yp, t.delta);
  return s;
}

/// Per-atom power tables so monomials of a fixed measure are cheap to evaluate.
class AtomPowers {
 public:
  AtomPowers(const std::vector<Point>& atoms, std::size_t dim, int max_degree)
      : dim_(dim), stride_(static_cast<std::size_t>(max_degree) + 1), n_(atoms.size()),
        table_(atoms.size() * dim * stride_, 1.0) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t c = 0; c < dim; ++c) {
        double* row = &table_[(i * dim + c) * stride_];
        for (std::size_t e = 1; e < stride_; ++e) row[e] = row[e - 1] * atoms[i][c];
      }
  }

  std::size_t size() const noexcept { return n_; }

  double monomial(std::size_t atom, const MultiIndex& a) const {
    double r = 1.0;
    const double* base = &table_[atom * dim_ * stride_];
    for (std::size_t c = 0; c < dim_; ++c)
      if (a.components[c] != 0) r *= base[c * stride_ + static_cast<std::size_t>(a.components[c])];
    return r;
  }

  std::vector<double> monomials(const MultiIndex& a) const {
    std::vector<double> v(n_);
    for (std::size_t i = 0; i < n_; ++i) v[i] = monomial(i, a);
    return v;
  }

 private:
  std::size_t dim_, stride_, n_;
  std::vector<double> table_;
};

namespace detail {

inline void check_dims(const KernelExpansion& exp, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != exp.d_x || nu.dim() != exp.d_y)
    throw DimensionMismatch("measures have dimensions (" + std::to_string(mu.dim()) + "," +
                            std::to_string(nu.dim()) + ") but the expansion is for " +
                            config_name(exp.r, exp.k, exp.d_x, exp.d_y));
}

inline void check_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Coupling& pi, double tol) {
  if (pi.rows != mu.size() || pi.cols != nu.size())
    throw DimensionMismatch("coupling is " + std::to_string(pi.rows) + "x" + std::to_string(pi.cols) +
                            " but the measures have " + std::to_string(mu.size()) + " and " +
                            std::to_string(nu.size()) + " atoms");
  const double err = pi.marginal_error(mu.weights(), nu.weights());
  if (err > tol)
    throw InvalidArgument("coupling marginals deviate from the measures by " + std::to_string(err));
}

}  // namespace detail

/// Mixed moments M_{alpha,gamma}(pi) for the requested factor indices (others left 0).
inline std::vector<double> mixed_moments(const KernelExpansion& exp, const DiscreteMeasure& mu,
                                         const DiscreteMeasure& nu, const Coupling& pi,
                                         const std::vector<bool>& wanted) {
  AtomPowers xp(mu.atoms(), mu.dim(), exp.max_degree());
  AtomPowers yp(nu.atoms(), nu.dim(), exp.max_degree());
  std::map<MultiIndex, std::vector<double>> xcache, ycache;
  auto xs = [&](const MultiIndex& a) -> const std::vector<double>& {
    auto it = xcache.find(a);
    if (it == xcache.end()) it = xcache.emplace(a, xp.monomials(a)).first;
    return it->second;
  };
  auto ys = [&](const MultiIndex& g) -> const std::vector<double>& {
    auto it = ycache.find(g);
    if (it == ycache.end()) it = ycache.emplace(g, yp.monomials(g)).first;
    return it->second;
  };
  std::vector<double> out(exp.factors.size(), 0.0);
  for (std::size_t f = 0; f < exp.factors.size(); ++f) {
    if (!wanted[f]) continue;
    const auto& xv = xs(exp.factors[f].first);
    const auto& yv = ys(exp.factors[f].second);
    double s = 0.0;
    for (std::size_t i = 0; i < pi.rows; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < pi.cols; ++j) row += pi(i, j) * yv[j];
      s += xv[i] * row;
    }
    out[f] = s;
  }
  return out;
}

/// Sum of the marginal-only terms, each factor a moment of mu or nu alone.
inline double marginal_value(const KernelExpansion& exp, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  detail::check_dims(exp, mu, nu);
  std::map<MultiIndex, double> mx, my;
  auto factor = [&](const MultiIndex& a, const MultiIndex& g) {
    if (a.is_zero()) {
      auto it = my.find(g);
      if (it == my.end()) it = my.emplace(g, moment(nu, g)).first;
      return it->second;
    }
    auto it = mx.find(a);
    if (it == mx.end()) it = mx.emplace(a, moment(mu, a)).first;
    return it->second;
  };
  double s = 0.0;
  for (const auto& t : exp.terms)
    if (t.marginal_only) s += t.coeff * factor(t.alpha, t.gamma) * factor(t.beta, t.delta);
  return s;
}

/// Q(pi): the sum of the non-marginal terms with mixed moments of pi.
inline double coupling_value_direct(const KernelExpansion& exp, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                    const Coupling& pi) {
  detail::check_dims(exp, mu, nu);
  detail::check_coupling(mu, nu, pi, 1e-9);
  std::vector<bool> wanted(exp.factors.size(), false);
  for (const auto& t : exp.terms)
    if (!t.marginal_only) wanted[t.first_factor] = wanted[t.second_factor] = true;
  const auto m = mixed_moments(exp, mu, nu, pi, wanted);
  double s = 0.0;
  for (const auto& t : exp.terms)
    if (!t.marginal_only) s += t.coeff * m[t.first_factor] * m[t.second_factor];
  return s;
}

/// The quadruple sum sum_{i,j,i',j'} pi_ij pi_i'j' kernel(x_i, x_i', y_j, y_j').
inline double gw_objective_bruteforce(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Coupling& pi, int r,
                                      int k) {
  detail::check_coupling(mu, nu, pi, 1e-10);
  const std::size_t nx = mu.size(), ny = nu.size();
  std::vector<double> kx(nx * nx), ky(ny * ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t a = 0; a < nx; ++a) kx[i * nx + a] = int_pow(squared_distance(mu.atom(i), mu.atom(a)), k);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t b = 0; b < ny; ++b) ky[j * ny + b] = int_pow(squared_distance(nu.atom(j), nu.atom(b)), k);
  double total = 0.0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const double w = pi(i, j);
      if (w == 0.0) continue;
      double inner = 0.0;
      for (std::size_t a = 0; a < nx; ++a)
        for (std::size_t b = 0; b < ny; ++b) {
          const double wb = pi(a, b);
          if (wb != 0.0) inner += wb * int_pow(kx[i * nx + a] - ky[j * ny + b], 2 * r);
        }
      total += w * inner;
    }
  return total;
}

}  // namespace evengw

#endif  // EVENGW_POLY_EXPAND_HPP
