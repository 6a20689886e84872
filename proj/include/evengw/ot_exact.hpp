#ifndef EVENGW_OT_EXACT_HPP
#define EVENGW_OT_EXACT_HPP

// Exact discrete optimal transport on the bipartite transportation graph.
//
// Primal network simplex: the basis is a spanning tree on the n_x + n_y atoms
// with n_x + n_y - 1 basic cells. Potentials solve phi_i + psi_j = c_ij on the
// tree with phi_0 = 0; an entering cell with negative reduced cost closes a
// cycle in the tree along which flow is shifted. Dantzig pricing is used until
// a run of degenerate pivots suggests cycling, after which Bland's rule
// (lowest-index entering and leaving cell) takes over.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "evengw/coupling.hpp"
#include "evengw/error.hpp"

namespace evengw {

struct OTSolution {
  double value = 0.0;
  Coupling plan;
  std::vector<double> phi;
  std::vector<double> psi;
  std::size_t pivots = 0;

  double dual_value(std::span<const double> mu_w, std::span<const double> nu_w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) s += mu_w[i] * phi[i];
    for (std::size_t j = 0; j < psi.size(); ++j) s += nu_w[j] * psi[j];
    return s;
  }
};

struct OTOptions {
  /// Consecutive degenerate pivots tolerated before switching to Bland's rule,
  /// as a multiple of n_x + n_y.
  std::size_t degenerate_factor = 20;
  bool force_bland = false;
};

namespace detail {

inline void check_probability(std::span<const double> w, const char* name) {
  if (w.empty()) throw InvalidArgument(std::string(name) + " weights are empty");
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument(std::string(name) + " weights must be finite and nonnegative");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw InvalidArgument(std::string(name) + " weights sum to " + std::to_string(s) + ", not 1");
}

class TransportSimplex {
 public:
  TransportSimplex(const Matrix& cost, std::vector<double> supply, std::vector<double> demand, const OTOptions& opt)
      : c_(cost), n_(supply.size()), m_(demand.size()), opt_(opt) {
    double scale = 0.0;
    for (double v : c_.data) scale = std::max(scale, std::abs(v));
    tol_ = 1e-12 * std::max(1.0, scale);
    northwest_corner(std::move(supply), std::move(demand));
  }

  void run() {
    const std::size_t nodes = n_ + m_;
    const std::size_t cap = 50 * n_ * m_ * (nodes) + 10'000;
    std::size_t degenerate_run = 0;
    bool bland = opt_.force_bland;
    for (;;) {
      build_tree();
      std::size_t ei = 0, ej = 0;
      if (!price(bland, ei, ej)) return;
      if (++pivots_ > cap) throw SolverError("transport simplex exceeded its pivot cap");
      const double theta = pivot(ei, ej, bland);
      if (theta <= 0.0) {
        if (++degenerate_run > opt_.degenerate_factor * nodes) bland = true;
      } else {
        degenerate_run = 0;
      }
    }
  }

  std::size_t pivots() const { return pivots_; }
  const std::vector<double>& potentials() const { return pot_; }

  Coupling plan() const {
    Coupling p(n_, m_);
    for (const auto& b : basic_) p(b.i, b.j) += std::max(0.0, b.flow);
    return p;
  }

 private:
  struct Basic {
    std::size_t i, j;
    double flow;
  };

  void northwest_corner(std::vector<double> a, std::vector<double> b) {
    std::size_t i = 0, j = 0;
    for (;;) {
      const bool row_first = a[i] < b[j];
      const double f = row_first ? a[i] : b[j];
      basic_.push_back({i, j, f});
      if (i + 1 == n_ && j + 1 == m_) break;
      if (i + 1 == n_) {
        b[j] = 0.0;
        a[i] -= f;
        ++j;
      } else if (j + 1 == m_) {
        a[i] = 0.0;
        b[j] -= f;
        ++i;
      } else if (row_first) {
        a[i] = 0.0;
        b[j] -= f;
        ++i;
      } else {
        b[j] = 0.0;
        a[i] -= f;
        ++j;
      }
    }
  }

  // Rooted at row node 0; fills parent links, depths and potentials.
  void build_tree() {
    const std::size_t nodes = n_ + m_;
    adj_.assign(nodes, {});
    for (std::size_t e = 0; e < basic_.size(); ++e) {
      adj_[basic_[e].i].push_back(e);
      adj_[n_ + basic_[e].j].push_back(e);
    }
    parent_.assign(nodes, SIZE_MAX);
    parent_edge_.assign(nodes, SIZE_MAX);
    depth_.assign(nodes, 0);
    pot_.assign(nodes, 0.0);
    std::vector<bool> seen(nodes, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t e : adj_[u]) {
        const std::size_t row = basic_[e].i, col = n_ + basic_[e].j;
        const std::size_t v = (u == row) ? col : row;
        if (seen[v]) continue;
        seen[v] = true;
        ++visited;
        parent_[v] = u;
        parent_edge_[v] = e;
        depth_[v] = depth_[u] + 1;
        pot_[v] = c_(basic_[e].i, basic_[e].j) - pot_[u];
        stack.push_back(v);
      }
    }
    if (visited != nodes) throw SolverError("transport simplex basis is not a spanning tree");
  }

  bool price(bool bland, std::size_t& ei, std::size_t& ej) const {
    double best = -tol_;
    bool found = false;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j) {
        const double rc = c_(i, j) - pot_[i] - pot_[n_ + j];
        if (rc < best) {
          ei = i;
          ej = j;
          found = true;
          if (bland) return true;
          best = rc;
        }
      }
    return found;
  }

  double pivot(std::size_t ei, std::size_t ej, bool bland) {
    // Tree path from column node ej to row node ei; edges alternate -, +, -, ...
    std::size_t a = n_ + ej, b = ei;
    std::vector<std::size_t> from_a, from_b;
    while (depth_[a] > depth_[b]) {
      from_a.push_back(parent_edge_[a]);
      a = parent_[a];
    }
    while (depth_[b] > depth_[a]) {
      from_b.push_back(parent_edge_[b]);
      b = parent_[b];
    }
    while (a != b) {
      from_a.push_back(parent_edge_[a]);
      a = parent_[a];
      from_b.push_back(parent_edge_[b]);
      b = parent_[b];
    }
    std::vector<std::size_t> path = std::move(from_a);
    path.insert(path.end(), from_b.rbegin(), from_b.rend());

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = SIZE_MAX;
    for (std::size_t t = 0; t < path.size(); t += 2) {
      const auto& e = basic_[path[t]];
      const double f = e.flow;
      bool take = f < theta;
      if (!take && f == theta && bland) {
        const auto& cur = basic_[leave];
        take = (e.i * m_ + e.j) < (cur.i * m_ + cur.j);
      }
      if (take) {
        theta = f;
        leave = path[t];
      }
    }
    theta = std::max(0.0, theta);
    for (std::size_t t = 0; t < path.size(); ++t) basic_[path[t]].flow += (t % 2 == 0) ? -theta : theta;
    basic_[leave] = {ei, ej, theta};
    return theta;
  }

  const Matrix& c_;
  std::size_t n_, m_;
  OTOptions opt_;
  double tol_ = 0.0;
  std::size_t pivots_ = 0;
  std::vector<Basic> basic_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> parent_, parent_edge_, depth_;
  std::vector<double> pot_;
};

}  // namespace detail

/// Exact optimal transport between probability vectors for a dense cost matrix.
inline OTSolution solve_ot(const Matrix& cost, std::span<const double> mu_w, std::span<const double> nu_w,
                           const OTOptions& opt = {}) {
  detail::check_probability(mu_w, "first");
  detail::check_probability(nu_w, "second");
  if (cost.rows != mu_w.size() || cost.cols != nu_w.size())
    throw DimensionMismatch("cost matrix is " + std::to_string(cost.rows) + "x" + std::to_string(cost.cols) +
                            " but the weights have sizes " + std::to_string(mu_w.size()) + " and " +
                            std::to_string(nu_w.size()));
  for (double v : cost.data)
    if (!std::isfinite(v)) throw InvalidArgument("cost matrix has a non-finite entry");

  // Zero-weight atoms are removed and reinserted afterwards.
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < mu_w.size(); ++i)
    if (mu_w[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < nu_w.size(); ++j)
    if (nu_w[j] > 0.0) cols.push_back(j);
  Matrix reduced(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) reduced(a, b) = cost(rows[a], cols[b]);
  std::vector<double> supply, demand;
  double sa = 0.0, sb = 0.0;
  for (auto i : rows) sa += mu_w[i];
  for (auto j : cols) sb += nu_w[j];
  for (auto i : rows) supply.push_back(mu_w[i]);
  for (auto j : cols) demand.push_back(nu_w[j] * (sa / sb));

  detail::TransportSimplex simplex(reduced, std::move(supply), std::move(demand), opt);
  simplex.run();

  OTSolution sol;
  sol.pivots = simplex.pivots();
  sol.plan = Coupling(mu_w.size(), nu_w.size());
  const Coupling rp = simplex.plan();
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) sol.plan(rows[a], cols[b]) = rp(a, b);

  constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  sol.phi.assign(mu_w.size(), kUnset);
  sol.psi.assign(nu_w.size(), kUnset);
  const auto& pot = simplex.potentials();
  for (std::size_t a = 0; a < rows.size(); ++a) sol.phi[rows[a]] = pot[a];
  for (std::size_t b = 0; b < cols.size(); ++b) sol.psi[cols[b]] = pot[rows.size() + b];
  // Dropped atoms get c-transform potentials, which keeps phi + psi <= c everywhere.
  for (std::size_t i = 0; i < mu_w.size(); ++i) {
    if (!std::isnan(sol.phi[i])) continue;
    double m = std::numeric_limits<double>::infinity();
    for (auto j : cols) m = std::min(m, cost(i, j) - sol.psi[j]);
    sol.phi[i] = m;
  }
  for (std::size_t j = 0; j < nu_w.size(); ++j) {
    if (!std::isnan(sol.psi[j])) continue;
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mu_w.size(); ++i) m = std::min(m, cost(i, j) - sol.phi[i]);
    sol.psi[j] = m;
  }
  const double shift = sol.phi[0];
  for (auto& v : sol.phi) v -= shift;
  for (auto& v : sol.psi) v += shift;

  for (std::size_t c = 0; c < sol.plan.mass.size(); ++c) sol.value += sol.plan.mass[c] * cost.data[c];
  return sol;
}

/// g_j = min_i (c_ij - f_i): the transform of a potential on the rows to the columns.
inline std::vector<double> c_transform(const Matrix& cost, std::span<const double> f) {
  if (cost.rows == 0 || cost.cols == 0) throw InvalidArgument("c-transform needs nonempty grids");
  if (f.size() != cost.rows) throw DimensionMismatch("potential length does not match the cost rows");
  std::vector<double> g(cost.cols, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < cost.rows; ++i)
    for (std::size_t j = 0; j < cost.cols; ++j) g[j] = std::min(g[j], cost(i, j) - f[i]);
  return g;
}

/// f_i = min_j (c_ij - g_j): the reverse transform from columns to rows.
inline std::vector<double> c_transform_rows(const Matrix& cost, std::span<const double> g) {
  if (cost.rows == 0 || cost.cols == 0) throw InvalidArgument("c-transform needs nonempty grids");
  if (g.size() != cost.cols) throw DimensionMismatch("potential length does not match the cost columns");
  std::vector<double> f(cost.rows, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < cost.rows; ++i)
    for (std::size_t j = 0; j < cost.cols; ++j) f[i] = std::min(f[i], cost(i, j) - g[j]);
  return f;
}

/// Whether OT(mix*c1 + (1-mix)*c2) >= mix*OT(c1) + (1-mix)*OT(c2) - 1e-9.
inline bool ot_concavity_check(const Matrix& c1, const Matrix& c2, std::span<const double> mu_w,
                               std::span<const double> nu_w, double mix) {
  if (c1.rows != c2.rows || c1.cols != c2.cols) throw DimensionMismatch("cost matrices differ in shape");
  if (!(mix >= 0.0 && mix <= 1.0)) throw InvalidArgument("mix must lie in [0,1]");
  Matrix blend(c1.rows, c1.cols);
  for (std::size_t t = 0; t < blend.data.size(); ++t) blend.data[t] = mix * c1.data[t] + (1.0 - mix) * c2.data[t];
  const double lhs = solve_ot(blend, mu_w, nu_w).value;
  const double rhs = mix * solve_ot(c1, mu_w, nu_w).value + (1.0 - mix) * solve_ot(c2, mu_w, nu_w).value;
  return lhs >= rhs - 1e-9;
}

}  // namespace evengw

#endif  // EVENGW_OT_EXACT_HPP
