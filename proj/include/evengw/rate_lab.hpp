#ifndef EVENGW_RATE_LAB_HPP
#define EVENGW_RATE_LAB_HPP

// Monte-Carlo rate experiments: plug-in errors |D(mu,nu) - D(mu_n,nu_n)| over a
// grid of sample sizes, a least-squares log-log slope, and a bootstrap interval.
//
// Every trial draws its X- and Y-samples from seeds derived from
// (seed, n, trial, side), so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evengw/error.hpp"
#include "evengw/gw_solve.hpp"
#include "evengw/measure.hpp"
#include "evengw/poly_expand.hpp"
#include "evengw/random.hpp"

namespace evengw {

enum class Reference { ClosedForm, SelfZero, HighNEstimate };

inline const char* to_string(Reference r) {
  switch (r) {
    case Reference::ClosedForm: return "closed_form";
    case Reference::SelfZero: return "self_zero";
    case Reference::HighNEstimate: return "high_n_estimate";
  }
  return "unknown";
}

inline Reference parse_reference(const std::string& s) {
  if (s == "closed_form") return Reference::ClosedForm;
  if (s == "self_zero") return Reference::SelfZero;
  if (s == "high_n_estimate") return Reference::HighNEstimate;
  throw InvalidArgument("unknown reference mode '" + s + "' (expected closed_form, self_zero or high_n_estimate)");
}

/// rho_n(d) = n^{-2/max(d,4)} * log(e n)^{[d == 4]}.
inline double rho_n(double n, std::size_t d) {
  if (!(n >= 1) || d == 0) throw InvalidArgument("rho_n needs n >= 1 and d >= 1");
  const double base = std::pow(n, -2.0 / static_cast<double>(std::max<std::size_t>(d, 4)));
  return d == 4 ? base * std::log(std::numbers::e * n) : base;
}

/// g(p) R^{4kr} with g(t) = 2t(1-t): D_{r,k} between the two-point law and delta_0.
inline double lower_bound_exact(double p, double R, int r, int k) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("p must lie strictly between 0 and 1");
  if (!(R > 0.0)) throw InvalidArgument("R must be positive");
  if (r < 1 || k < 1) throw InvalidArgument("r and k must be at least 1");
  return 2.0 * p * (1.0 - p) * int_pow(R, 4 * k * r);
}

/// |g(count/n) - g(p)| R^{4kr}: the plug-in error of one two-point trial.
inline double lower_check_error(std::size_t count, std::size_t n, double p, double R, int r, int k) {
  const double ph = static_cast<double>(count) / static_cast<double>(n);
  return std::abs(2.0 * ph * (1.0 - ph) - 2.0 * p * (1.0 - p)) * int_pow(R, 4 * k * r);
}

// ---------------------------------------------------------------------------
// Statistics

/// Least-squares slope of log(y) against log(x); empty when any y <= 0.
inline std::optional<double> fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope fit needs at least two matching points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !std::isfinite(y[i])) return std::nullopt;
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Average ranks (1-based), ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation; NaN when either side is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman needs at least two matching points");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

/// Half-width of the central 95% percentile interval of the slope, resampling trials within each n.
inline double bootstrap_slope_halfwidth(const std::vector<double>& ns, const std::vector<std::vector<double>>& errors,
                                        std::uint64_t seed, std::size_t reps = 1000) {
  Rng rng(derive_seed(seed, {0xb007ULL}));
  std::vector<double> slopes;
  slopes.reserve(reps);
  std::vector<double> means(ns.size());
  for (std::size_t b = 0; b < reps; ++b) {
    for (std::size_t g = 0; g < ns.size(); ++g) {
      const auto& e = errors[g];
      double s = 0;
      for (std::size_t t = 0; t < e.size(); ++t) s += e[rng.next_u64() % e.size()];
      means[g] = s / static_cast<double>(e.size());
    }
    if (auto sl = fit_loglog_slope(ns, means)) slopes.push_back(*sl);
  }
  if (slopes.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::sort(slopes.begin(), slopes.end());
  auto q = [&](double f) { return slopes[static_cast<std::size_t>(std::floor(f * static_cast<double>(slopes.size() - 1)))]; };
  return (q(0.975) - q(0.025)) / 2.0;
}

// ---------------------------------------------------------------------------
// Population moments

/// E[x^alpha] under the named distribution (closed form for every supported kind).
inline double population_moment(const DistributionSpec& spec, const MultiIndex& alpha) {
  if (alpha.dim() != spec.dim) throw DimensionMismatch("multi-index dimension does not match the distribution");
  const int order = alpha.order();
  switch (spec.kind) {
    case DistributionSpec::Kind::PointMass:
      return order == 0 ? 1.0 : 0.0;
    case DistributionSpec::Kind::TwoPoint: {
      if (order == 0) return 1.0;
      for (std::size_t j = 1; j < alpha.dim(); ++j)
        if (alpha[j] != 0) return 0.0;
      return spec.p * int_pow(spec.scale, alpha[0]);
    }
    case DistributionSpec::Kind::UniformCube: {
      double m = 1.0;
      for (int a : alpha.components) {
        if (a % 2 != 0) return 0.0;
        m *= int_pow(spec.scale, a) / (a + 1.0);
      }
      return m;
    }
    case DistributionSpec::Kind::UniformBall: {
      for (int a : alpha.components)
        if (a % 2 != 0) return 0.0;
      // E x^alpha = rho^|a| * Gamma(d/2+1) prod Gamma((a_j+1)/2) / (pi^{d/2} Gamma((|a|+d)/2 + 1)).
      const double d = static_cast<double>(spec.dim);
      double lg = std::lgamma(d / 2.0 + 1.0) - std::lgamma((order + d) / 2.0 + 1.0) - d / 2.0 * std::log(std::numbers::pi);
      for (int a : alpha.components) lg += std::lgamma((a + 1.0) / 2.0);
      return int_pow(spec.scale, order) * std::exp(lg);
    }
  }
  return 0.0;
}

/// M_{r,k}(mu, nu) from population moments of the two distributions.
inline double population_marginal_value(const KernelExpansion& exp, const DistributionSpec& dx,
                                        const DistributionSpec& dy) {
  if (dx.dim != exp.d_x || dy.dim != exp.d_y) throw DimensionMismatch("distribution dimensions do not match the expansion");
  double s = 0.0;
  for (const auto& t : exp.terms) {
    if (!t.marginal_only) continue;
    auto factor = [&](const MultiIndex& a, const MultiIndex& g) {
      return a.is_zero() ? population_moment(dy, g) : population_moment(dx, a);
    };
    s += t.coeff * factor(t.alpha, t.gamma) * factor(t.beta, t.delta);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Experiments

struct RateExperiment {
  int r = 1, k = 1;
  DistributionSpec dist_x = DistributionSpec::point_mass(1);
  DistributionSpec dist_y = DistributionSpec::point_mass(1);
  std::vector<std::size_t> n_grid;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  Reference reference = Reference::SelfZero;
  SolverConfig solver{};
  std::size_t threads = 1;
  /// Fraction of closed-form trials re-run through compute_gw.
  double cross_check_fraction = 0.01;
  /// Optional translations applied to every sample (empty = none).
  Point offset_x, offset_y;

  std::size_t d_x() const { return dist_x.dim; }
  std::size_t d_y() const { return dist_y.dim; }
  std::size_t d_star() const { return std::min(d_x(), d_y()); }

  void validate() const {
    if (n_grid.size() < 2) throw InvalidArgument("n_grid needs at least two entries");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 1) throw InvalidArgument("n_grid entries must be positive");
      if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw InvalidArgument("n_grid must be strictly increasing");
    }
    if (trials < 1) throw InvalidArgument("trials must be at least 1");
    if (r < 1 || k < 1) throw InvalidArgument("r and k must be at least 1");
    if (!(cross_check_fraction >= 0.0 && cross_check_fraction <= 1.0))
      throw InvalidArgument("cross_check_fraction must lie in [0,1]");
    if (!offset_x.empty() && offset_x.size() != d_x()) throw DimensionMismatch("offset_x has the wrong dimension");
    if (!offset_y.empty() && offset_y.size() != d_y()) throw DimensionMismatch("offset_y has the wrong dimension");
    solver.validate();
  }
};

struct RateResult {
  std::vector<std::size_t> n_grid;
  std::vector<std::vector<double>> per_n_errors;
  std::vector<double> mean_errors;
  /// NaN when some mean error is zero (slope undefined).
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  bool slope_defined = false;
  double predicted_slope = 0.0;
  double slope_ci_halfwidth = std::numeric_limits<double>::quiet_NaN();
  double spearman = std::numeric_limits<double>::quiet_NaN();
  double reference_value = 0.0;
  bool reference_is_estimate = false;
  std::size_t cross_checks = 0;
  std::vector<std::string> notes;
};

namespace detail {

/// Runs body(t) for t in [0, count) on up to `threads` workers; rethrows the
/// exception of the lowest failing index.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t t = 0; t < count; ++t) body(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mtx;
  std::size_t failed_at = SIZE_MAX;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t t = next++; t < count; t = next++) {
        try {
          body(t);
        } catch (...) {
          std::lock_guard lock(mtx);
          if (t < failed_at) {
            failed_at = t;
            failure = std::current_exception();
          }
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline DiscreteMeasure draw_sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed, const Point& offset) {
  DiscreteMeasure m = sample(spec, n, seed);
  return offset.empty() ? m : m.transformed(1.0, offset);
}

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t n, std::size_t trial, std::uint64_t side) {
  return derive_seed(seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial), side});
}

inline bool is_two_point_vs_point(const RateExperiment& e) {
  using K = DistributionSpec::Kind;
  return (e.dist_x.kind == K::TwoPoint && e.dist_y.kind == K::PointMass) ||
         (e.dist_y.kind == K::TwoPoint && e.dist_x.kind == K::PointMass);
}

/// Whether trial t at grid index g is re-run through the full pipeline.
inline bool cross_checked(std::size_t g, std::size_t t, std::size_t trials, double fraction) {
  if (fraction <= 0.0) return false;
  const auto every = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / fraction)));
  return (t + g) % every == 0 || (trials < every && t == 0);
}

inline void summarize(RateResult& res, std::size_t d_star, std::uint64_t seed) {
  std::vector<double> ns;
  for (auto n : res.n_grid) ns.push_back(static_cast<double>(n));
  res.mean_errors.clear();
  for (const auto& e : res.per_n_errors) {
    double s = 0;
    for (double v : e) s += v;  // fixed order, independent of the thread schedule
    res.mean_errors.push_back(s / static_cast<double>(e.size()));
  }
  res.predicted_slope = -2.0 / static_cast<double>(std::max<std::size_t>(d_star, 4));
  if (auto sl = fit_loglog_slope(ns, res.mean_errors)) {
    res.fitted_slope = *sl;
    res.slope_defined = true;
    res.slope_ci_halfwidth = bootstrap_slope_halfwidth(ns, res.per_n_errors, seed);
  } else {
    res.notes.push_back("slope undefined: some mean error is zero");
  }
  res.spearman = spearman(ns, res.mean_errors);
  if (d_star > 4)
    res.notes.push_back("d_* > 4: the solver returns upper bounds, slope is a diagnostic (theoretical " +
                        std::to_string(res.predicted_slope) + ")");
}

}  // namespace detail

/// Plug-in errors for every n in the grid and a log-log slope fit.
inline RateResult run_rate_experiment(const RateExperiment& exp) {
  exp.validate();
  RateResult res;
  res.n_grid = exp.n_grid;
  const std::size_t G = exp.n_grid.size(), T = exp.trials;
  res.per_n_errors.assign(G, std::vector<double>(T, 0.0));

  const bool fast = exp.reference == Reference::ClosedForm && detail::is_two_point_vs_point(exp);
  switch (exp.reference) {
    case Reference::ClosedForm: {
      using K = DistributionSpec::Kind;
      const bool x_finite = exp.dist_x.kind == K::TwoPoint || exp.dist_x.kind == K::PointMass;
      const bool y_finite = exp.dist_y.kind == K::TwoPoint || exp.dist_y.kind == K::PointMass;
      if (!x_finite || !y_finite || (exp.dist_x.kind != K::PointMass && exp.dist_y.kind != K::PointMass))
        throw InvalidArgument("closed_form reference needs a two-point or point-mass law against a point mass");
      const DiscreteMeasure px = population_measure(exp.dist_x), py = population_measure(exp.dist_y);
      res.reference_value = compute_gw(px, py, exp.r, exp.k, exp.solver).value;
      break;
    }
    case Reference::SelfZero:
      if (exp.dist_x.to_string() != exp.dist_y.to_string())
        throw InvalidArgument("self_zero reference needs identical distributions, got " + exp.dist_x.to_string() +
                              " and " + exp.dist_y.to_string());
      res.reference_value = 0.0;
      break;
    case Reference::HighNEstimate: {
      const std::size_t big = 8 * exp.n_grid.back();
      std::vector<double> vals(16);
      detail::parallel_for(16, exp.threads, [&](std::size_t s) {
        const auto x = detail::draw_sample(exp.dist_x, big, detail::trial_seed(exp.seed, big, s, 0x7e0), exp.offset_x);
        const auto y = detail::draw_sample(exp.dist_y, big, detail::trial_seed(exp.seed, big, s, 0x7e1), exp.offset_y);
        vals[s] = compute_gw(x, y, exp.r, exp.k, exp.solver).value;
      });
      double s = 0;
      for (double v : vals) s += v;
      res.reference_value = s / 16.0;
      res.reference_is_estimate = true;
      res.notes.push_back("reference estimated at n = " + std::to_string(big) + " averaged over 16 seeds");
      break;
    }
  }

  std::vector<std::size_t> checks(G * T, 0);
  detail::parallel_for(G * T, exp.threads, [&](std::size_t job) {
    const std::size_t g = job / T, t = job % T, n = exp.n_grid[g];
    const auto x = detail::draw_sample(exp.dist_x, n, detail::trial_seed(exp.seed, n, t, 0), exp.offset_x);
    const auto y = detail::draw_sample(exp.dist_y, n, detail::trial_seed(exp.seed, n, t, 1), exp.offset_y);
    SolverConfig cfg = exp.solver;
    cfg.seed = detail::trial_seed(exp.seed, n, t, 2);
    try {
      if (fast) {
        const bool x_two = exp.dist_x.kind == DistributionSpec::Kind::TwoPoint;
        const auto& tp = x_two ? exp.dist_x : exp.dist_y;
        const auto& side = x_two ? x : y;
        const auto& origin = x_two ? exp.offset_x : exp.offset_y;
        std::size_t count = 0;
        for (const auto& a : side.atoms()) {
          const double x0 = a[0] - (origin.empty() ? 0.0 : origin[0]);
          count += std::abs(x0 - tp.scale) < std::abs(x0);
        }
        const double ph = static_cast<double>(count) / static_cast<double>(n);
        const double est = 2.0 * ph * (1.0 - ph) * int_pow(tp.scale, 4 * exp.k * exp.r);
        res.per_n_errors[g][t] = std::abs(est - res.reference_value);
        if (detail::cross_checked(g, t, T, exp.cross_check_fraction)) {
          const double full = compute_gw(x, y, exp.r, exp.k, cfg).value;
          if (std::abs(full - est) > 1e-9 * std::max(1.0, std::abs(est)))
            throw SolverError("pipeline value " + std::to_string(full) + " differs from the closed form " +
                              std::to_string(est));
          checks[job] = 1;
        }
      } else {
        const double est = compute_gw(x, y, exp.r, exp.k, cfg).value;
        res.per_n_errors[g][t] = std::abs(est - res.reference_value);
      }
    } catch (const Error& e) {
      throw SolverError("trial " + std::to_string(t) + " at n = " + std::to_string(n) + ": " + e.what());
    }
  });
  for (auto c : checks) res.cross_checks += c;
  detail::summarize(res, exp.d_star(), exp.seed);
  return res;
}

/// The two-point law (p, R) on the line against delta_0: solver-free plug-in errors
/// with pipeline cross-checks on a fraction of trials.
inline RateResult empirical_lower_check(double p, double R, int r, int k, std::vector<std::size_t> n_grid,
                                        std::size_t trials, std::uint64_t seed, std::size_t threads = 1,
                                        double cross_check_fraction = 0.01) {
  lower_bound_exact(p, R, r, k);  // validates the parameters
  RateExperiment e;
  e.r = r;
  e.k = k;
  e.dist_x = DistributionSpec::two_point(1, R, p);
  e.dist_y = DistributionSpec::point_mass(1);
  e.n_grid = std::move(n_grid);
  e.trials = trials;
  e.seed = seed;
  e.reference = Reference::ClosedForm;
  e.threads = threads;
  e.cross_check_fraction = cross_check_fraction;
  return run_rate_experiment(e);
}

/// Errors of the marginal term alone, |M(mu_n, nu_n) - M(mu, nu)|, against closed-form population moments.
inline RateResult marginal_rate_experiment(int r, int k, const DistributionSpec& dist_x, const DistributionSpec& dist_y,
                                           std::vector<std::size_t> n_grid, std::size_t trials, std::uint64_t seed,
                                           std::size_t threads = 1) {
  RateExperiment e;
  e.r = r;
  e.k = k;
  e.dist_x = dist_x;
  e.dist_y = dist_y;
  e.n_grid = std::move(n_grid);
  e.trials = trials;
  e.validate();
  const auto expn = cached_expansion(r, k, dist_x.dim, dist_y.dim);
  RateResult res;
  res.n_grid = e.n_grid;
  res.reference_value = population_marginal_value(*expn, dist_x, dist_y);
  const std::size_t G = e.n_grid.size();
  res.per_n_errors.assign(G, std::vector<double>(trials, 0.0));
  detail::parallel_for(G * trials, threads, [&](std::size_t job) {
    const std::size_t g = job / trials, t = job % trials, n = e.n_grid[g];
    const auto x = sample(dist_x, n, detail::trial_seed(seed, n, t, 0));
    const auto y = sample(dist_y, n, detail::trial_seed(seed, n, t, 1));
    res.per_n_errors[g][t] = std::abs(marginal_value(*expn, x, y) - res.reference_value);
  });
  detail::summarize(res, e.d_star(), seed);
  res.predicted_slope = -0.5;
  return res;
}

/// Errors of a single empirical moment |M^X_alpha(mu_n) - E x^alpha|.
inline RateResult moment_rate_experiment(const DistributionSpec& dist, const MultiIndex& alpha,
                                         std::vector<std::size_t> n_grid, std::size_t trials, std::uint64_t seed,
                                         std::size_t threads = 1) {
  RateExperiment e;
  e.dist_x = e.dist_y = dist;
  e.n_grid = std::move(n_grid);
  e.trials = trials;
  e.validate();
  RateResult res;
  res.n_grid = e.n_grid;
  res.reference_value = population_moment(dist, alpha);
  const std::size_t G = e.n_grid.size();
  res.per_n_errors.assign(G, std::vector<double>(trials, 0.0));
  detail::parallel_for(G * trials, threads, [&](std::size_t job) {
    const std::size_t g = job / trials, t = job % trials, n = e.n_grid[g];
    res.per_n_errors[g][t] = std::abs(moment(sample(dist, n, detail::trial_seed(seed, n, t, 0)), alpha) - res.reference_value);
  });
  detail::summarize(res, dist.dim, seed);
  res.predicted_slope = -0.5;
  return res;
}

}  // namespace evengw

#endif  // EVENGW_RATE_LAB_HPP
