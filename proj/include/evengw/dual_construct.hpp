#ifndef EVENGW_DUAL_CONSTRUCT_HPP
#define EVENGW_DUAL_CONSTRUCT_HPP

// Quadratic-form and signed-polynomial representation of the coupling term.
//
// Q(pi) = u(pi)^T C u(pi) with u_j(pi) = int h_j dpi and h_j(x,y) = x^alpha_j y^gamma_j.
// Diagonalizing C = U^T diag(lambda) U and scaling the rows of U by sqrt|lambda|
// gives polynomials P_i with
//   Q(pi) = sum_{i <= ell} (int P_i dpi)^2 - sum_{i > ell} (int P_i dpi)^2,
// and the cost family c_{u,v} = sum_i u_i P_i - sum_j v_j P_{ell+j}.
//
// C is stored sparsely. Its nonzero pattern splits into many connected
// components, so the spectral decomposition runs one dense Jacobi per block.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "evengw/error.hpp"
#include "evengw/jacobi.hpp"
#include "evengw/measure.hpp"
#include "evengw/poly_expand.hpp"

namespace evengw {

struct MixedBasis {
  std::size_t d_x = 0, d_y = 0;
  int max_degree = 0;
  /// entries[0] is the constant pair (0, 0).
  std::vector<std::pair<MultiIndex, MultiIndex>> entries;

  std::size_t size() const noexcept { return entries.size(); }

  std::size_t index_of(const MultiIndex& alpha, const MultiIndex& gamma) const {
    auto it = lookup_.find({alpha, gamma});
    if (it == lookup_.end()) throw InvalidArgument("pair is not in the mixed basis");
    return it->second;
  }

  void rebuild_index() {
    lookup_.clear();
    for (std::size_t i = 0; i < entries.size(); ++i) lookup_.emplace(entries[i], i);
  }

 private:
  std::map<std::pair<MultiIndex, MultiIndex>, std::size_t> lookup_;
};

struct SparseEntry {
  std::size_t row, col;
  double value;
};

/// Symmetric sparse matrix over a MixedBasis.
struct QuadraticForm {
  std::shared_ptr<const MixedBasis> basis;
  /// Upper triangle (row <= col), sorted by (row, col), zeros dropped.
  std::vector<SparseEntry> upper;

  std::size_t size() const { return basis ? basis->size() : 0; }

  double entry(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    auto it = std::lower_bound(upper.begin(), upper.end(), std::pair{i, j}, [](const SparseEntry& e, const auto& key) {
      return std::pair{e.row, e.col} < key;
    });
    return (it != upper.end() && it->row == i && it->col == j) ? it->value : 0.0;
  }

  /// C u.
  std::vector<double> apply(std::span<const double> u) const {
    std::vector<double> out(size(), 0.0);
    for (const auto& e : upper) {
      out[e.row] += e.value * u[e.col];
      if (e.row != e.col) out[e.col] += e.value * u[e.row];
    }
    return out;
  }

  /// u^T C w.
  double bilinear(std::span<const double> u, std::span<const double> w) const {
    double s = 0.0;
    for (const auto& e : upper) {
      s += e.value * u[e.row] * w[e.col];
      if (e.row != e.col) s += e.value * u[e.col] * w[e.row];
    }
    return s;
  }

  double value(std::span<const double> u) const { return bilinear(u, u); }

  double frobenius() const {
    double s = 0.0;
    for (const auto& e : upper) s += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
    return std::sqrt(s);
  }

  SquareMatrix dense() const {
    SquareMatrix m(size());
    for (const auto& e : upper) m(e.row, e.col) = m(e.col, e.row) = e.value;
    return m;
  }
};

struct FormOptions {
  std::size_t basis_cap = 50'000;
  /// Largest connected block handed to a dense Jacobi solve.
  std::size_t block_cap = 4'000;
};

/// Scatter every coupling term's coefficient onto (first factor, second factor),
/// then symmetrize.
inline QuadraticForm build_quadratic_form(const KernelExpansion& exp, const FormOptions& opt = {}) {
  auto basis = std::make_shared<MixedBasis>();
  basis->d_x = exp.d_x;
  basis->d_y = exp.d_y;
  basis->max_degree = exp.max_degree();
  const std::pair<MultiIndex, MultiIndex> constant{MultiIndex(exp.d_x), MultiIndex(exp.d_y)};
  basis->entries.push_back(constant);

  std::vector<std::size_t> factor_to_basis(exp.factors.size(), SIZE_MAX);
  std::vector<bool> used(exp.factors.size(), false);
  for (const auto& t : exp.terms)
    if (!t.marginal_only) used[t.first_factor] = used[t.second_factor] = true;
  for (std::size_t f = 0; f < exp.factors.size(); ++f) {
    if (!used[f]) continue;
    if (exp.factors[f] == constant) {
      factor_to_basis[f] = 0;
      continue;
    }
    factor_to_basis[f] = basis->entries.size();
    basis->entries.push_back(exp.factors[f]);
  }
  if (basis->entries.size() > opt.basis_cap)
    throw CapExceeded("mixed basis for " + config_name(exp.r, exp.k, exp.d_x, exp.d_y) + " has " +
                      std::to_string(basis->entries.size()) + " entries, above the basis cap of " +
                      std::to_string(opt.basis_cap));
  basis->rebuild_index();

  std::map<std::pair<std::size_t, std::size_t>, double> acc;
  for (const auto& t : exp.terms) {
    if (t.marginal_only) continue;
    std::size_t a = factor_to_basis[t.first_factor], b = factor_to_basis[t.second_factor];
    if (a > b) std::swap(a, b);
    // (C0 + C0^T)/2: an off-diagonal coefficient is split over (a,b) and (b,a).
    acc[{a, b}] += (a == b) ? t.coeff : 0.5 * t.coeff;
  }
  QuadraticForm q;
  q.basis = std::move(basis);
  q.upper.reserve(acc.size());
  for (const auto& [key, v] : acc)
    if (v != 0.0) q.upper.push_back({key.first, key.second, v});
  return q;
}

/// Vector of h_j(x, y) = x^alpha_j y^gamma_j over the basis, for every (x_i, y_j)
/// pair, laid out as rows (i * n_y + j) of length m0.
inline std::vector<double> basis_design_matrix(const MixedBasis& basis, const std::vector<Point>& xs,
                                               const std::vector<Point>& ys) {
  AtomPowers xp(xs, basis.d_x, basis.max_degree);
  AtomPowers yp(ys, basis.d_y, basis.max_degree);
  const std::size_t m0 = basis.size();
  std::vector<double> hx(xs.size() * m0), hy(ys.size() * m0);
  for (std::size_t b = 0; b < m0; ++b) {
    for (std::size_t i = 0; i < xs.size(); ++i) hx[i * m0 + b] = xp.monomial(i, basis.entries[b].first);
    for (std::size_t j = 0; j < ys.size(); ++j) hy[j * m0 + b] = yp.monomial(j, basis.entries[b].second);
  }
  std::vector<double> h(xs.size() * ys.size() * m0);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) {
      double* row = &h[(i * ys.size() + j) * m0];
      for (std::size_t b = 0; b < m0; ++b) row[b] = hx[i * m0 + b] * hy[j * m0 + b];
    }
  return h;
}

/// u(pi) = (int h_j dpi)_j given the design matrix of the coupling's support grid.
inline std::vector<double> moment_vector(std::span<const double> design, std::size_t m0, const Coupling& pi) {
  std::vector<double> u(m0, 0.0);
  for (std::size_t c = 0; c < pi.mass.size(); ++c) {
    const double w = pi.mass[c];
    if (w == 0.0) continue;
    const double* row = &design[c * m0];
    for (std::size_t b = 0; b < m0; ++b) u[b] += w * row[b];
  }
  return u;
}

using SparseVector = std::vector<std::pair<std::size_t, double>>;

struct SpectralDecomposition {
  /// Retained (nonzero) eigenvalues: positives descending, then negatives ascending.
  std::vector<double> eigvals;
  /// Unit eigenvectors over the basis, sparse, same order as eigvals.
  std::vector<SparseVector> eigvecs;
  std::size_t ell = 0;
  std::size_t dropped = 0;
  std::size_t largest_block = 0;
  std::size_t block_count = 0;
};

namespace detail {

/// Negative when a precedes b lexicographically as dense vectors.
inline int compare_sparse(const SparseVector& a, const SparseVector& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const std::size_t ia = i < a.size() ? a[i].first : SIZE_MAX;
    const std::size_t jb = j < b.size() ? b[j].first : SIZE_MAX;
    double va = 0.0, vb = 0.0;
    if (ia <= jb) va = a[i].second;
    if (jb <= ia) vb = b[j].second;
    if (va != vb) return va < vb ? -1 : 1;
    if (ia <= jb) ++i;
    if (jb <= ia) ++j;
  }
  return 0;
}

}  // namespace detail

/// Block-wise Jacobi diagonalization of C. Eigenvalues with |lambda| <= zero_tol * max|lambda|
/// are dropped.
inline SpectralDecomposition eigendecompose(const QuadraticForm& q, double zero_tol = 1e-9,
                                            const FormOptions& opt = {}) {
  const std::size_t m0 = q.size();
  std::vector<std::size_t> parent(m0);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : q.upper)
    if (e.row != e.col) parent[find(e.row)] = find(e.col);

  std::map<std::size_t, std::vector<std::size_t>> blocks;
  for (std::size_t i = 0; i < m0; ++i) blocks[find(i)].push_back(i);
  std::vector<std::vector<SparseEntry>> block_entries;
  std::vector<std::size_t> block_of(m0), local(m0);
  std::size_t nb = 0;
  for (auto& [root, members] : blocks) {
    for (std::size_t l = 0; l < members.size(); ++l) {
      block_of[members[l]] = nb;
      local[members[l]] = l;
    }
    ++nb;
  }
  block_entries.resize(nb);
  for (const auto& e : q.upper) block_entries[block_of[e.row]].push_back(e);

  SpectralDecomposition out;
  out.block_count = nb;
  std::vector<double> vals;
  std::vector<SparseVector> vecs;
  std::size_t b = 0;
  for (auto& [root, members] : blocks) {
    const auto& ents = block_entries[b++];
    out.largest_block = std::max(out.largest_block, members.size());
    if (ents.empty()) {
      out.dropped += members.size();
      continue;
    }
    if (members.size() > opt.block_cap)
      throw CapExceeded("quadratic-form block of size " + std::to_string(members.size()) + " exceeds the block cap of " +
                        std::to_string(opt.block_cap));
    SquareMatrix dense(members.size());
    for (const auto& e : ents) dense(local[e.row], local[e.col]) = e.value;
    auto eig = jacobi_eigen(std::move(dense));
    for (std::size_t i = 0; i < members.size(); ++i) {
      SparseVector v;
      for (std::size_t l = 0; l < members.size(); ++l) {
        const double c = eig.vectors(i, l);
        if (c != 0.0) v.emplace_back(members[l], c);
      }
      std::sort(v.begin(), v.end());
      vals.push_back(eig.values[i]);
      vecs.push_back(std::move(v));
    }
  }

  double max_abs = 0.0;
  for (double v : vals) max_abs = std::max(max_abs, std::abs(v));
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (std::abs(vals[i]) <= zero_tol * max_abs || vals[i] == 0.0) {
      ++out.dropped;
      continue;
    }
    // Sign convention: the first component of non-negligible size is positive.
    auto& v = vecs[i];
    double vmax = 0.0;
    for (auto& [idx, c] : v) vmax = std::max(vmax, std::abs(c));
    for (auto& [idx, c] : v)
      if (std::abs(c) > 1e-9 * vmax) {
        if (c < 0)
          for (auto& [idx2, c2] : v) c2 = -c2;
        break;
      }
    keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b2) {
    const double la = vals[a], lb = vals[b2];
    const bool pa = la > 0, pb = lb > 0;
    if (pa != pb) return pa;
    if (la != lb) return pa ? la > lb : la < lb;
    return detail::compare_sparse(vecs[a], vecs[b2]) < 0;
  });
  for (std::size_t i : keep) {
    out.eigvals.push_back(vals[i]);
    out.eigvecs.push_back(std::move(vecs[i]));
    if (vals[i] > 0) ++out.ell;
  }
  return out;
}

/// Measure-independent part of the dual family: the polynomials P_i and their signs.
struct SignedPolynomials {
  std::shared_ptr<const MixedBasis> basis;
  /// P_i as sparse coefficients over the basis: sqrt|lambda_i| * U_i.
  std::vector<SparseVector> polys;
  std::vector<double> eigvals;
  std::size_t ell = 0;

  std::size_t count() const noexcept { return polys.size(); }
};

inline SignedPolynomials signed_polynomials(const QuadraticForm& q, const SpectralDecomposition& spec) {
  SignedPolynomials out;
  out.basis = q.basis;
  out.eigvals = spec.eigvals;
  out.ell = spec.ell;
  out.polys.reserve(spec.eigvecs.size());
  for (std::size_t i = 0; i < spec.eigvecs.size(); ++i) {
    const double scale = std::sqrt(std::abs(spec.eigvals[i]));
    SparseVector p = spec.eigvecs[i];
    for (auto& [idx, c] : p) c *= scale;
    out.polys.push_back(std::move(p));
  }
  return out;
}

/// Values P_i(x, y) at every support pair, as rows i of length n_x * n_y.
inline std::vector<double> polynomial_values(const SignedPolynomials& sp, std::span<const double> design,
                                             std::size_t points) {
  const std::size_t m0 = sp.basis->size();
  std::vector<double> out(sp.count() * points, 0.0);
  for (std::size_t i = 0; i < sp.count(); ++i)
    for (std::size_t c = 0; c < points; ++c) {
      const double* row = &design[c * m0];
      double s = 0.0;
      for (const auto& [idx, coef] : sp.polys[i]) s += coef * row[idx];
      out[i * points + c] = s;
    }
  return out;
}

struct DualCostFamily {
  std::shared_ptr<const SignedPolynomials> polys;
  /// C_i^basis = max over the support product of |P_i|.
  std::vector<double> basis_sup;
  /// Box half-widths for u (first ell) and v (remaining J - ell).
  std::vector<double> box_plus, box_minus;

  std::size_t J() const { return polys ? polys->count() : 0; }
  std::size_t ell() const { return polys ? polys->ell : 0; }
  const std::vector<double>& eigvals() const { return polys->eigvals; }
  bool has_boxes() const { return basis_sup.size() == J(); }

  double max_basis_sup() const {
    double m = 0.0;
    for (double v : basis_sup) m = std::max(m, v);
    return m;
  }
  /// Parametric Lipschitz constant max(1, C_basis * sqrt(J)).
  double lipschitz_constant() const {
    return std::max(1.0, max_basis_sup() * std::sqrt(static_cast<double>(J())));
  }
};

/// Boxes from the exact sup of |P_i| over supp_x x supp_y.
inline DualCostFamily attach_boxes(std::shared_ptr<const SignedPolynomials> sp, const std::vector<Point>& supp_x,
                                   const std::vector<Point>& supp_y) {
  if (supp_x.empty() || supp_y.empty()) throw InvalidArgument("box construction needs nonempty supports");
  DualCostFamily fam;
  fam.polys = std::move(sp);
  const auto design = basis_design_matrix(*fam.polys->basis, supp_x, supp_y);
  const std::size_t pts = supp_x.size() * supp_y.size();
  const auto vals = polynomial_values(*fam.polys, design, pts);
  fam.basis_sup.assign(fam.J(), 0.0);
  for (std::size_t i = 0; i < fam.J(); ++i)
    for (std::size_t c = 0; c < pts; ++c) fam.basis_sup[i] = std::max(fam.basis_sup[i], std::abs(vals[i * pts + c]));
  for (std::size_t i = 0; i < fam.J(); ++i)
    (i < fam.ell() ? fam.box_plus : fam.box_minus).push_back(fam.basis_sup[i] / 2.0);
  return fam;
}

inline DualCostFamily build_cost_family(const QuadraticForm& q, const std::vector<Point>& supp_x,
                                        const std::vector<Point>& supp_y, double zero_tol = 1e-9) {
  auto sp = std::make_shared<const SignedPolynomials>(signed_polynomials(q, eigendecompose(q, zero_tol)));
  return attach_boxes(std::move(sp), supp_x, supp_y);
}

/// Process-wide cache of (form, spectral polynomials) per configuration.
struct DualSetup {
  std::shared_ptr<const KernelExpansion> expansion;
  std::shared_ptr<const QuadraticForm> form;
  std::shared_ptr<const SignedPolynomials> polys;
  std::size_t largest_block = 0;
};

inline DualSetup cached_dual_setup(int r, int k, std::size_t d_x, std::size_t d_y, double zero_tol = 1e-9,
                                   const ExpansionOptions& eopt = {}, const FormOptions& fopt = {}) {
  using Key = std::tuple<int, int, std::size_t, std::size_t, double, std::size_t, std::size_t>;
  static std::mutex mtx;
  static std::map<Key, DualSetup> cache;
  const Key key{r, k, d_x, d_y, zero_tol, eopt.term_cap, fopt.basis_cap};
  {
    std::lock_guard lock(mtx);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  DualSetup s;
  s.expansion = cached_expansion(r, k, d_x, d_y, eopt);
  s.form = std::make_shared<const QuadraticForm>(build_quadratic_form(*s.expansion, fopt));
  auto spec = eigendecompose(*s.form, zero_tol, fopt);
  s.largest_block = spec.largest_block;
  s.polys = std::make_shared<const SignedPolynomials>(signed_polynomials(*s.form, spec));
  std::lock_guard lock(mtx);
  return cache.try_emplace(key, std::move(s)).first->second;
}

struct CostParams {
  std::vector<double> u;  // length ell
  std::vector<double> v;  // length J - ell
};

/// Combined coefficient vector w over the basis with c_{u,v}(x,y) = sum_j w_j h_j(x,y).
/// Out-of-box parameters throw in strict mode and are clamped otherwise.
inline std::vector<double> cost_coefficients(const DualCostFamily& fam, CostParams theta, bool strict = false) {
  const std::size_t ell = fam.ell(), J = fam.J();
  if (theta.u.size() != ell || theta.v.size() != J - ell)
    throw DimensionMismatch("cost parameters have sizes (" + std::to_string(theta.u.size()) + "," +
                            std::to_string(theta.v.size()) + "), expected (" + std::to_string(ell) + "," +
                            std::to_string(J - ell) + ")");
  if (fam.has_boxes()) {
    auto enforce = [&](std::vector<double>& p, const std::vector<double>& box, const char* name) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double h = box[i] * (1.0 + 1e-12) + 1e-300;
        if (std::abs(p[i]) <= h) continue;
        if (strict)
          throw InvalidArgument(std::string("parameter ") + name + "[" + std::to_string(i) + "] = " +
                                std::to_string(p[i]) + " lies outside its box half-width " + std::to_string(box[i]));
        p[i] = std::clamp(p[i], -box[i], box[i]);
      }
    };
    enforce(theta.u, fam.box_plus, "u");
    enforce(theta.v, fam.box_minus, "v");
  }
  std::vector<double> w(fam.polys->basis->size(), 0.0);
  for (std::size_t i = 0; i < J; ++i) {
    const double t = i < ell ? theta.u[i] : -theta.v[i - ell];
    if (t == 0.0) continue;
    for (const auto& [idx, c] : fam.polys->polys[i]) w[idx] += t * c;
  }
  return w;
}

/// c_{u,v}(x, y) at a single point.
inline double cost_eval(const DualCostFamily& fam, const CostParams& theta, const Point& x, const Point& y,
                        bool strict = false) {
  const auto w = cost_coefficients(fam, theta, strict);
  const auto& basis = *fam.polys->basis;
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    if (w[j] != 0.0) s += w[j] * monomial(x, basis.entries[j].first) * monomial(y, basis.entries[j].second);
  return s;
}

}  // namespace evengw

#endif  // EVENGW_DUAL_CONSTRUCT_HPP
