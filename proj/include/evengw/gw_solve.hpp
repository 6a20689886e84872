#ifndef EVENGW_GW_SOLVE_HPP
#define EVENGW_GW_SOLVE_HPP

// D_{r,k}(mu, nu) = M_{r,k}(mu, nu) + inf_pi Q_{r,k}(pi).
//
// Q is an indefinite quadratic on the transportation polytope, so every solver
// here returns the objective attained at an explicit coupling: an upper bound
// on the infimum. Three routes are provided:
//   * Frank-Wolfe on u(pi)^T C u(pi) with exact OT as the linear oracle,
//   * alternating best responses in the signed-polynomial dual family,
//   * a brute-force oracle for tiny supports (grid scan + exact face enumeration).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evengw/dual_construct.hpp"
#include "evengw/error.hpp"
#include "evengw/measure.hpp"
#include "evengw/ot_exact.hpp"
#include "evengw/poly_expand.hpp"
#include "evengw/random.hpp"

namespace evengw {

struct SolverConfig {
  std::size_t restarts = 10;
  std::size_t max_iters = 500;
  double fw_tol = 1e-9;
  std::uint64_t seed = 0;
  /// Grid step (in mass units) of the brute-force scan.
  double oracle_grid_resolution = 0.02;
  double zero_tol = 1e-9;
  /// Run the dual alternating scheme in compute_gw next to Frank-Wolfe.
  bool use_dual = true;
  /// Multiplier on the dual box half-widths (1 = the sup-of-|P_i| boxes).
  double box_scale = 1.0;
  ExpansionOptions expansion{};
  FormOptions form{};

  void validate() const {
    if (restarts < 1 || max_iters < 1) throw InvalidArgument("restarts and max_iters must be at least 1");
    if (!(fw_tol > 0) || !(oracle_grid_resolution > 0) || !(zero_tol > 0) || !(box_scale > 0))
      throw InvalidArgument("solver tolerances must be positive");
  }
};

enum class SolveMethod { FrankWolfe, DualAlternating, BruteForce, ExactForced };

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::FrankWolfe: return "frank_wolfe";
    case SolveMethod::DualAlternating: return "dual_alternating";
    case SolveMethod::BruteForce: return "brute_force";
    case SolveMethod::ExactForced: return "exact_forced";
  }
  return "unknown";
}

struct GWResult {
  double value = 0.0;
  double marginal_part = 0.0;
  double coupling_part = 0.0;
  Coupling plan;
  SolveMethod method = SolveMethod::ExactForced;
  std::size_t restarts_used = 0;
  std::size_t iterations = 0;
  bool converged = true;
  /// Final (u, v) of the dual scheme, in normalized coordinates.
  std::optional<CostParams> dual_params;
  /// M + 4 * (final dual objective) when the dual scheme ran.
  std::optional<double> dual_estimate;
  /// Set when both supports were single points (R = 0).
  bool degenerate = false;
};

/// Everything the solvers need about one (mu, nu) pair for a fixed (r, k).
class GWProblem {
 public:
  GWProblem(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int r, int k, const SolverConfig& cfg = {})
      : mu_(mu), nu_(nu), r_(r), k_(k) {
    expansion_ = cached_expansion(r, k, mu.dim(), nu.dim(), cfg.expansion);
    form_ = std::make_shared<const QuadraticForm>(build_quadratic_form(*expansion_, cfg.form));
    init();
  }

  GWProblem(const DiscreteMeasure& mu, const DiscreteMeasure& nu, std::shared_ptr<const KernelExpansion> exp,
            std::shared_ptr<const QuadraticForm> form)
      : mu_(mu), nu_(nu), r_(exp->r), k_(exp->k), expansion_(std::move(exp)), form_(std::move(form)) {
    init();
  }

  const DiscreteMeasure& mu() const { return mu_; }
  const DiscreteMeasure& nu() const { return nu_; }
  int r() const { return r_; }
  int k() const { return k_; }
  const KernelExpansion& expansion() const { return *expansion_; }
  const QuadraticForm& form() const { return *form_; }
  std::shared_ptr<const QuadraticForm> form_ptr() const { return form_; }
  double marginal() const { return marginal_; }
  std::size_t basis_size() const { return form_->size(); }
  std::size_t cells() const { return mu_.size() * nu_.size(); }
  const std::vector<double>& design() const { return design_; }

  std::vector<double> moments(const Coupling& pi) const { return moment_vector(design_, basis_size(), pi); }
  double coupling_value(const Coupling& pi) const { return form_->value(moments(pi)); }
  double objective(const Coupling& pi) const { return marginal_ + coupling_value(pi); }

  /// Gradient of Q with respect to pi: 2 * h(x_i, y_j) . (C u).
  Matrix gradient(std::span<const double> u) const {
    const auto cu = form_->apply(u);
    Matrix g(mu_.size(), nu_.size());
    const std::size_t m0 = basis_size();
    for (std::size_t c = 0; c < cells(); ++c) {
      const double* row = &design_[c * m0];
      double s = 0.0;
      for (std::size_t b = 0; b < m0; ++b) s += row[b] * cu[b];
      g.data[c] = 2.0 * s;
    }
    return g;
  }

 private:
  void init() {
    if (mu_.dim() != expansion_->d_x || nu_.dim() != expansion_->d_y)
      throw DimensionMismatch("measure dimensions do not match the kernel expansion");
    marginal_ = marginal_value(*expansion_, mu_, nu_);
    design_ = basis_design_matrix(*form_->basis, mu_.atoms(), nu_.atoms());
  }

  DiscreteMeasure mu_, nu_;
  int r_, k_;
  std::shared_ptr<const KernelExpansion> expansion_;
  std::shared_ptr<const QuadraticForm> form_;
  double marginal_ = 0.0;
  std::vector<double> design_;
};

namespace detail {

inline constexpr std::size_t kDirectSumCells = 1024;

/// Sorted (value, weight) pairs of ||z_i - z_a||^{2k} over the atoms a.
inline std::vector<std::pair<double, double>> distance_profile(const DiscreteMeasure& m, std::size_t i, int k) {
  std::vector<std::pair<double, double>> out;
  out.reserve(m.size());
  for (std::size_t a = 0; a < m.size(); ++a) out.emplace_back(int_pow(squared_distance(m.atom(i), m.atom(a)), k), m.weight(a));
  std::sort(out.begin(), out.end());
  return out;
}

/// Monotone (quantile) transport cost with |s - t|^{2r} between two sorted profiles.
inline double profile_cost(const std::vector<std::pair<double, double>>& a, const std::vector<std::pair<double, double>>& b,
                           int r) {
  double cost = 0.0, ra = a[0].second, rb = b[0].second;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double f = std::min(ra, rb);
    cost += f * int_pow(a[i].first - b[j].first, 2 * r);
    ra -= f;
    rb -= f;
    if (ra <= rb) {
      if (++i < a.size()) ra += a[i].second;
    } else if (++j < b.size()) {
      rb += b[j].second;
    }
  }
  return cost;
}

/// Optimal plan for the distance-profile cost: the two points are matched by how
/// their distances to the rest of their own space are distributed. Equal for mu = nu
/// on the diagonal, so self-comparisons start at the identity.
inline Coupling profile_coupling(const GWProblem& p) {
  const auto& mu = p.mu();
  const auto& nu = p.nu();
  std::vector<std::vector<std::pair<double, double>>> px, py;
  for (std::size_t i = 0; i < mu.size(); ++i) px.push_back(distance_profile(mu, i, p.k()));
  for (std::size_t j = 0; j < nu.size(); ++j) py.push_back(distance_profile(nu, j, p.k()));
  Matrix c(mu.size(), nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) c(i, j) = profile_cost(px[i], py[j], p.r());
  return solve_ot(c, mu.weights(), nu.weights()).plan;
}

/// Restart 0 is the independent coupling, restart 1 the distance-profile plan;
/// later restarts are vertices from random costs.
inline Coupling restart_coupling(const GWProblem& p, std::size_t restart, std::uint64_t seed) {
  if (restart == 0) return Coupling::product(p.mu().weights(), p.nu().weights());
  if (restart == 1) return profile_coupling(p);
  Rng rng(derive_seed(seed, {0x5eedULL, restart}));
  Matrix c(p.mu().size(), p.nu().size());
  for (auto& v : c.data) v = rng.uniform();
  return solve_ot(c, p.mu().weights(), p.nu().weights()).plan;
}

/// argmin over t in [0,1] of a t^2 + b t.
inline double segment_minimizer(double a, double b) {
  if (a > 0) return std::clamp(-b / (2.0 * a), 0.0, 1.0);
  return (a + b < 0.0) ? 1.0 : 0.0;
}

inline void blend_into(Coupling& pi, const Coupling& target, double t) {
  for (std::size_t c = 0; c < pi.mass.size(); ++c) pi.mass[c] += t * (target.mass[c] - pi.mass[c]);
}

inline GWResult finish(const GWProblem& p, Coupling plan, SolveMethod method) {
  GWResult r;
  for (auto& m : plan.mass) m = std::max(0.0, m);
  r.coupling_part = p.coupling_value(plan);
  r.marginal_part = p.marginal();
  r.value = r.marginal_part + r.coupling_part;
  r.plan = std::move(plan);
  r.method = method;
  return r;
}

}  // namespace detail

/// Conditional gradient with exact OT linear minimization and exact line search.
inline GWResult solve_frank_wolfe(const GWProblem& p, const SolverConfig& cfg = {}) {
  cfg.validate();
  std::optional<GWResult> best;
  std::size_t total_iters = 0;
  for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
    Coupling pi = detail::restart_coupling(p, restart, cfg.seed);
    auto u = p.moments(pi);
    double f = p.form().value(u);
    bool converged = false;
    std::size_t it = 0;
    for (; it < cfg.max_iters; ++it) {
      const Matrix g = p.gradient(u);
      const Coupling target = solve_ot(g, p.mu().weights(), p.nu().weights()).plan;
      auto du = p.moments(target);
      for (std::size_t b = 0; b < du.size(); ++b) du[b] -= u[b];
      const double a = p.form().value(du);
      const double lin = 2.0 * p.form().bilinear(u, du);
      if (lin >= 0.0) {
        converged = true;  // no descent direction: first-order stationary
        break;
      }
      const double t = detail::segment_minimizer(a, lin);
      const double f_new = f + a * t * t + lin * t;
      detail::blend_into(pi, target, t);
      for (std::size_t b = 0; b < u.size(); ++b) u[b] += t * du[b];
      const double decrease = f - f_new;
      f = f_new;
      if (decrease <= cfg.fw_tol * std::max(std::abs(f), 1e-12)) {
        converged = true;
        break;
      }
    }
    total_iters += it;
    auto res = detail::finish(p, std::move(pi), SolveMethod::FrankWolfe);
    res.converged = converged;
    if (!best || res.value < best->value) best = std::move(res);
  }
  best->restarts_used = cfg.restarts;
  best->iterations = total_iters;
  return *best;
}

/// Cost matrix c_theta(x_i, y_j) over the problem's support grid.
inline Matrix cost_matrix(const DualCostFamily& fam, const CostParams& theta, const std::vector<Point>& xs,
                          const std::vector<Point>& ys, bool strict = false) {
  const auto w = cost_coefficients(fam, theta, strict);
  const auto design = basis_design_matrix(*fam.polys->basis, xs, ys);
  const std::size_t m0 = w.size();
  Matrix c(xs.size(), ys.size());
  for (std::size_t cell = 0; cell < c.data.size(); ++cell) {
    const double* row = &design[cell * m0];
    double s = 0.0;
    for (std::size_t b = 0; b < m0; ++b) s += w[b] * row[b];
    c.data[cell] = s;
  }
  return c;
}

/// (C_theta f)(y) = min_x c_theta(x, y) - f(x) over the given grids.
inline std::vector<double> c_transform(const DualCostFamily& fam, const CostParams& theta, std::span<const double> f,
                                       const std::vector<Point>& x_grid, const std::vector<Point>& y_grid) {
  if (x_grid.empty() || y_grid.empty()) throw InvalidArgument("c-transform needs nonempty grids");
  return c_transform(cost_matrix(fam, theta, x_grid, y_grid), f);
}

/// Alternating best responses in the signed-polynomial family: u = m_+(pi)/2,
/// v = m_-(pi)/2, then an exact OT solve for c_{u,v} and a line search toward it.
inline GWResult solve_dual_alternating(const GWProblem& p, const DualCostFamily& fam, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (!fam.has_boxes()) throw InvalidArgument("dual alternating needs a cost family with boxes");
  if (fam.polys->basis->size() != p.basis_size())
    throw DimensionMismatch("cost family and problem use different mixed bases");
  const std::size_t J = fam.J(), ell = fam.ell(), cells = p.cells();
  const auto pvals = polynomial_values(*fam.polys, p.design(), cells);
  auto integrals = [&](const Coupling& pi) {
    std::vector<double> m(J, 0.0);
    for (std::size_t i = 0; i < J; ++i) {
      const double* row = &pvals[i * cells];
      double s = 0.0;
      for (std::size_t c = 0; c < cells; ++c) s += row[c] * pi.mass[c];
      m[i] = s;
    }
    return m;
  };
  auto signed_sq = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < J; ++i) s += (i < ell ? 1.0 : -1.0) * a[i] * b[i];
    return s;
  };

  std::optional<GWResult> best;
  std::size_t total_iters = 0;
  for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
    Coupling pi = detail::restart_coupling(p, restart, cfg.seed);
    auto m = integrals(pi);
    CostParams theta;
    double dual_obj = 0.0, prev = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (; it < cfg.max_iters; ++it) {
      theta.u.assign(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(ell));
      theta.v.assign(m.begin() + static_cast<std::ptrdiff_t>(ell), m.end());
      for (auto& x : theta.u) x *= 0.5;
      for (auto& x : theta.v) x *= 0.5;
      for (std::size_t i = 0; i < J; ++i) {
        const double half = fam.basis_sup[i] / 2.0 * cfg.box_scale;
        const double val = i < ell ? theta.u[i] : theta.v[i - ell];
        if (std::abs(val) > half * (1.0 + 1e-9) + 1e-12)
          throw SolverError("dual parameter " + std::to_string(i) + " escaped its box (|" + std::to_string(val) +
                            "| > " + std::to_string(half) + ")");
      }
      Matrix cost(p.mu().size(), p.nu().size());
      for (std::size_t i = 0; i < J; ++i) {
        const double t = 0.5 * m[i] * (i < ell ? 1.0 : -1.0);
        if (t == 0.0) continue;
        const double* row = &pvals[i * cells];
        for (std::size_t c = 0; c < cells; ++c) cost.data[c] += t * row[c];
      }
      const OTSolution ot = solve_ot(cost, p.mu().weights(), p.nu().weights());
      double norm_u = 0.0, norm_v = 0.0;
      for (double x : theta.u) norm_u += x * x;
      for (double x : theta.v) norm_v += x * x;
      dual_obj = -norm_u + norm_v + ot.value;
      const bool settled = std::abs(dual_obj - prev) < cfg.fw_tol * std::max(1.0, std::abs(dual_obj));
      prev = dual_obj;

      auto dm = integrals(ot.plan);
      for (std::size_t i = 0; i < J; ++i) dm[i] -= m[i];
      const double a = signed_sq(dm, dm);
      const double lin = 2.0 * signed_sq(m, dm);
      if (settled || lin >= 0.0) break;
      const double t = detail::segment_minimizer(a, lin);
      detail::blend_into(pi, ot.plan, t);
      for (std::size_t i = 0; i < J; ++i) m[i] += t * dm[i];
    }
    total_iters += it;
    auto res = detail::finish(p, std::move(pi), SolveMethod::DualAlternating);
    const double estimate = p.marginal() + 4.0 * dual_obj;
    res.dual_estimate = estimate;
    res.dual_params = theta;
    res.converged = std::abs(estimate - res.value) <= 1e-8 * std::max(1.0, std::abs(res.value));
    if (!best || res.value < best->value) best = std::move(res);
  }
  best->restarts_used = cfg.restarts;
  best->iterations = total_iters;
  return *best;
}

/// Oracle for supports with n_x * n_y <= 9: a grid scan over the free entries of
/// the coupling, then the exact minimum over every face of the transportation
/// polytope (stationary point of Q on each face's affine hull, kept when feasible).
inline GWResult solve_brute_force(const GWProblem& p, const SolverConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = p.mu().size(), m = p.nu().size(), cells = n * m;
  if (cells > 9)
    throw CapExceeded("brute-force oracle supports at most 9 coupling cells, got " + std::to_string(n) + "x" +
                      std::to_string(m));
  const auto& a = p.mu().weights();
  const auto& b = p.nu().weights();
  const std::size_t m0 = p.basis_size();

  Eigen::MatrixXd K(cells, cells);
  for (std::size_t c1 = 0; c1 < cells; ++c1) {
    std::span<const double> h1(&p.design()[c1 * m0], m0);
    const auto ch = p.form().apply(h1);
    for (std::size_t c2 = 0; c2 < cells; ++c2) {
      double s = 0.0;
      for (std::size_t t = 0; t < m0; ++t) s += ch[t] * p.design()[c2 * m0 + t];
      K(c1, c2) = s;
    }
  }
  K = 0.5 * (K + K.transpose()).eval();
  auto qval = [&](const Eigen::VectorXd& x) { return x.dot(K * x); };

  Eigen::VectorXd best_x = Eigen::Map<const Eigen::VectorXd>(Coupling::product(a, b).mass.data(), cells);
  double best = qval(best_x);

  // Grid scan over the (n-1)(m-1) free entries.
  {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cells);
    std::vector<double> row_left(a.begin(), a.end()), col_left(b.begin(), b.end());
    const double step = cfg.oracle_grid_resolution;
    auto complete = [&]() {
      // Last column and last row are forced by the marginals.
      double corner = col_left[m - 1];
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (row_left[i] < -1e-12) return;
        x(i * m + m - 1) = std::max(0.0, row_left[i]);
        corner -= x(i * m + m - 1);
      }
      for (std::size_t j = 0; j + 1 < m; ++j) {
        if (col_left[j] < -1e-12) return;
        x((n - 1) * m + j) = std::max(0.0, col_left[j]);
      }
      if (corner < -1e-12) return;
      x((n - 1) * m + m - 1) = std::max(0.0, corner);
      const double v = qval(x);
      if (v < best) {
        best = v;
        best_x = x;
      }
    };
    auto rec = [&](auto&& self, std::size_t idx) -> void {
      if (idx == (n - 1) * (m - 1)) {
        complete();
        return;
      }
      const std::size_t i = idx / (m - 1), j = idx % (m - 1);
      const double hi = std::min(row_left[i], col_left[j]);
      const auto steps = static_cast<std::size_t>(std::floor(hi / step + 1e-9));
      for (std::size_t s = 0; s <= steps + 1; ++s) {
        const double v = s <= steps ? static_cast<double>(s) * step : hi;
        if (s == steps + 1 && std::abs(hi - static_cast<double>(steps) * step) < 1e-15) break;
        x(i * m + j) = v;
        row_left[i] -= v;
        col_left[j] -= v;
        self(self, idx + 1);
        row_left[i] += v;
        col_left[j] += v;
      }
      x(i * m + j) = 0.0;
    };
    if (n > 1 && m > 1) rec(rec, 0);
  }

  // Exact face enumeration: every subset Z of cells forced to zero.
  const std::size_t marg_rows = n + m;
  for (std::uint32_t mask = 0; mask < (1u << cells); ++mask) {
    const auto zeros = static_cast<std::size_t>(__builtin_popcount(mask));
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(marg_rows + zeros), static_cast<Eigen::Index>(cells));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(E.rows());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i * m + j)) = 1.0;
      rhs(static_cast<Eigen::Index>(i)) = a[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) E(static_cast<Eigen::Index>(n + j), static_cast<Eigen::Index>(i * m + j)) = 1.0;
      rhs(static_cast<Eigen::Index>(n + j)) = b[j];
    }
    Eigen::Index r = static_cast<Eigen::Index>(marg_rows);
    for (std::size_t c = 0; c < cells; ++c)
      if (mask & (1u << c)) E(r++, static_cast<Eigen::Index>(c)) = 1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(E);
    const Eigen::VectorXd x0 = lu.solve(rhs);
    if ((E * x0 - rhs).norm() > 1e-10) continue;  // empty face
    Eigen::VectorXd x = x0;
    const Eigen::MatrixXd N = lu.kernel();
    const bool has_kernel = lu.rank() < static_cast<Eigen::Index>(cells);
    if (has_kernel) {
      const Eigen::MatrixXd H = N.transpose() * K * N;
      Eigen::FullPivLU<Eigen::MatrixXd> hlu(H);
      if (hlu.rank() < H.rows()) continue;  // flat or indefinite direction: minimum lies on a smaller face
      const Eigen::VectorXd z = hlu.solve(-(N.transpose() * K * x0));
      x = x0 + N * z;
    }
    if (x.minCoeff() < -1e-12) continue;
    x = x.cwiseMax(0.0);
    const double v = qval(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }

  Coupling plan(n, m);
  for (std::size_t c = 0; c < cells; ++c) plan.mass[c] = best_x(static_cast<Eigen::Index>(c));
  auto res = detail::finish(p, std::move(plan), SolveMethod::BruteForce);
  res.restarts_used = 1;
  return res;
}

/// Unique coupling when either side is a single atom.
inline GWResult solve_forced(const GWProblem& p) {
  return detail::finish(p, Coupling::product(p.mu().weights(), p.nu().weights()), SolveMethod::ExactForced);
}

namespace detail {

/// Spread a plan on merged atoms back onto the original (possibly repeated) atoms.
inline Coupling unmerge_plan(const Coupling& merged, const DiscreteMeasure& mu, const std::vector<std::size_t>& own_x,
                             const std::vector<double>& merged_wx, const DiscreteMeasure& nu,
                             const std::vector<std::size_t>& own_y, const std::vector<double>& merged_wy) {
  Coupling out(mu.size(), nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const std::size_t a = own_x[i], b = own_y[j];
      const double fx = merged_wx[a] > 0 ? mu.weight(i) / merged_wx[a] : 0.0;
      const double fy = merged_wy[b] > 0 ? nu.weight(j) / merged_wy[b] : 0.0;
      out(i, j) = merged(a, b) * fx * fy;
    }
  return out;
}

}  // namespace detail

/// Full pipeline: merge repeated atoms, center and rescale into the unit ball,
/// solve in normalized coordinates, and scale back by (2R)^{4kr}.
inline GWResult compute_gw(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int r, int k,
                           const SolverConfig& cfg = {}) {
  cfg.validate();
  if (r < 1 || k < 1) throw InvalidArgument("r and k must be at least 1");
  std::vector<std::size_t> own_x, own_y;
  const DiscreteMeasure mx = merge_duplicates(mu, &own_x);
  const DiscreteMeasure my = merge_duplicates(nu, &own_y);
  const NormalizedPair np = normalize_pair(mx, my);

  GWResult res;
  if (np.degenerate) {
    res.plan = Coupling::product(mx.weights(), my.weights());
    res.method = SolveMethod::ExactForced;
    res.degenerate = true;
  } else {
    auto exp = cached_expansion(r, k, mu.dim(), nu.dim(), cfg.expansion);
    const bool forced = np.mu.size() == 1 || np.nu.size() == 1;
    if (forced || !cfg.use_dual) {
      auto form = std::make_shared<const QuadraticForm>(build_quadratic_form(*exp, cfg.form));
      GWProblem prob(np.mu, np.nu, exp, form);
      res = forced ? solve_forced(prob) : solve_frank_wolfe(prob, cfg);
    } else {
      const DualSetup setup = cached_dual_setup(r, k, mu.dim(), nu.dim(), cfg.zero_tol, cfg.expansion, cfg.form);
      GWProblem prob(np.mu, np.nu, setup.expansion, setup.form);
      res = solve_frank_wolfe(prob, cfg);
      const DualCostFamily fam = attach_boxes(setup.polys, np.mu.atoms(), np.nu.atoms());
      GWResult dual = solve_dual_alternating(prob, fam, cfg);
      if (dual.value < res.value) res = std::move(dual);
    }
    // M + Q cancels badly at high degree; the kernel double sum has nonnegative
    // terms only, so report it whenever it is affordable.
    if (np.mu.size() * np.nu.size() <= detail::kDirectSumCells) {
      res.value = gw_objective_bruteforce(np.mu, np.nu, res.plan, r, k);
      res.coupling_part = res.value - res.marginal_part;
    }
    const double scale = int_pow(2.0 * np.radius(), 4 * k * r);
    res.value *= scale;
    res.marginal_part *= scale;
    res.coupling_part *= scale;
    if (res.dual_estimate) *res.dual_estimate *= scale;
  }
  res.plan = detail::unmerge_plan(res.plan, mu, own_x, mx.weights(), nu, own_y, my.weights());
  return res;
}

}  // namespace evengw

#endif  // EVENGW_GW_SOLVE_HPP
