#ifndef EVENGW_CLI_HPP
#define EVENGW_CLI_HPP

// Command-line front end: compute, decompose, rate, selftest.
//
// Exit codes: 0 ok, 1 malformed input or arguments, 2 a size cap was exceeded,
// 3 a selftest check failed, 4 a solver failure.
// Precedence for every setting: flag > config file > EVENGW_SEED (seed only) > default.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evengw/dual_construct.hpp"
#include "evengw/gw_solve.hpp"
#include "evengw/io.hpp"
#include "evengw/ot_exact.hpp"
#include "evengw/poly_expand.hpp"
#include "evengw/rate_lab.hpp"

namespace evengw::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitCap = 2;
inline constexpr int kExitSelftest = 3;
inline constexpr int kExitSolver = 4;

struct CliConfig {
  std::string subcommand;
  std::string mu_path, nu_path, out_path, csv_path, config_path;
  int r = 1, k = 1;
  std::size_t dx = 1, dy = 1;
  std::uint64_t seed = 0;
  std::size_t restarts = 10, max_iters = 500, threads = 1, trials = 200;
  bool use_dual = true;
  std::size_t term_cap = ExpansionOptions{}.term_cap;
  std::vector<std::size_t> n_grid{32, 64, 128, 256, 512, 1024, 2048};
  std::string dist_x = "two-point:1:1:0.25", dist_y = "point-mass:1";
  std::string reference = "closed_form";
  std::string estimator = "gw";
  std::string inject = "none";
  bool quiet = false;

  SolverConfig solver() const {
    SolverConfig c;
    c.restarts = restarts;
    c.max_iters = max_iters;
    c.seed = seed;
    c.use_dual = use_dual;
    c.expansion.term_cap = term_cap;
    return c;
  }
};

inline io::json to_json(const CliConfig& c) {
  io::json j;
  j["subcommand"] = c.subcommand;
  j["r"] = c.r;
  j["k"] = c.k;
  j["seed"] = c.seed;
  if (c.subcommand == "compute") {
    j["mu"] = c.mu_path;
    j["nu"] = c.nu_path;
  }
  if (c.subcommand == "decompose") {
    j["dx"] = c.dx;
    j["dy"] = c.dy;
    if (!c.mu_path.empty()) j["mu"] = c.mu_path;
    if (!c.nu_path.empty()) j["nu"] = c.nu_path;
  }
  if (c.subcommand == "rate") {
    j["dist_x"] = c.dist_x;
    j["dist_y"] = c.dist_y;
    j["n_grid"] = c.n_grid;
    j["trials"] = c.trials;
    j["reference"] = c.reference;
    j["estimator"] = c.estimator;
  }
  j["restarts"] = c.restarts;
  j["max_iters"] = c.max_iters;
  j["use_dual"] = c.use_dual;
  j["term_cap"] = c.term_cap;
  return j;
}

namespace detail {

/// Comma-separated sizes, e.g. "32,64,128".
inline std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("--n-grid: '" + item + "' is not an integer");
    }
    if (used != item.size() || v < 1) throw InvalidArgument("--n-grid: '" + item + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw InvalidArgument("--n-grid is empty");
  return out;
}

/// Fills every setting whose flag was not given from the config file.
inline void apply_config_file(CliConfig& c, const CLI::App& sub) {
  std::ifstream in(c.config_path);
  if (!in) throw InvalidArgument("cannot open config file '" + c.config_path + "'");
  io::json j;
  try {
    j = io::json::parse(in);
  } catch (const io::json::exception& e) {
    throw InvalidArgument(c.config_path + ": " + e.what());
  }
  if (!j.is_object()) throw InvalidArgument(c.config_path + ": expected a JSON object");
  auto flag_given = [&](const std::string& name) {
    const CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option(name);
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
    return opt->count() > 0;
  };
  auto take = [&](const char* key, const std::string& flag, auto& field) {
    if (!j.contains(key) || flag_given(flag)) return;
    try {
      j.at(key).get_to(field);
    } catch (const io::json::exception& e) {
      throw InvalidArgument(c.config_path + ": bad value for '" + key + "': " + e.what());
    }
  };
  const std::set<std::string> known{"r", "k", "seed", "restarts", "max_iters", "threads", "trials", "n_grid", "dist_x",
                                    "dist_y", "reference", "use_dual", "dx", "dy", "mu", "nu", "term_cap", "estimator"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw InvalidArgument(c.config_path + ": unknown key '" + key + "'");
  take("r", "--r", c.r);
  take("k", "--k", c.k);
  take("seed", "--seed", c.seed);
  take("restarts", "--restarts", c.restarts);
  take("max_iters", "--max-iters", c.max_iters);
  take("threads", "--threads", c.threads);
  take("trials", "--trials", c.trials);
  take("dist_x", "--dist-x", c.dist_x);
  take("dist_y", "--dist-y", c.dist_y);
  take("reference", "--reference", c.reference);
  take("estimator", "--estimator", c.estimator);
  take("dx", "--dx", c.dx);
  take("dy", "--dy", c.dy);
  take("mu", "--mu", c.mu_path);
  take("nu", "--nu", c.nu_path);
  take("term_cap", "--term-cap", c.term_cap);
  if (j.contains("use_dual") && !flag_given("--no-dual")) j.at("use_dual").get_to(c.use_dual);
  if (j.contains("n_grid") && !flag_given("--n-grid")) {
    if (j["n_grid"].is_string())
      c.n_grid = parse_grid(j["n_grid"].get<std::string>());
    else
      take("n_grid", "--n-grid", c.n_grid);
  }
}

inline void validate(const CliConfig& c) {
  if (c.r < 1) throw InvalidArgument("--r must be at least 1, got " + std::to_string(c.r));
  if (c.k < 1) throw InvalidArgument("--k must be at least 1, got " + std::to_string(c.k));
  if (c.restarts < 1) throw InvalidArgument("--restarts must be at least 1");
  if (c.threads < 1) throw InvalidArgument("--threads must be at least 1");
  if (c.trials < 1) throw InvalidArgument("--trials must be at least 1");
  if (c.dx < 1 || c.dy < 1) throw InvalidArgument("--dx and --dy must be at least 1");
}

inline void emit(const std::string& path, const io::json& doc, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty() || path == "-")
    out << text;
  else
    io::write_file(path, text);
}

// ---------------------------------------------------------------------------
// Selftest

struct Check {
  explicit Check(std::string n) : name(std::move(n)) {}
  std::string name;
  bool passed = true;
  std::string detail;
};

inline DiscreteMeasure random_measure(Rng& rng, std::size_t d, std::size_t n) {
  std::vector<Point> atoms(n, Point(d));
  std::vector<double> w(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& c : atoms[i]) c = rng.uniform(-1, 1);
    w[i] = rng.uniform(0.2, 1.0);
    total += w[i];
  }
  for (auto& x : w) x /= total;
  w.back() = 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0);
  return DiscreteMeasure(d, std::move(atoms), std::move(w));
}

inline Coupling random_coupling(Rng& rng, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  // Mix the product plan with an OT vertex for a random cost.
  Matrix c(mu.size(), nu.size());
  for (auto& v : c.data) v = rng.uniform();
  const Coupling vert = solve_ot(c, mu.weights(), nu.weights()).plan;
  Coupling pi = Coupling::product(mu.weights(), nu.weights());
  const double t = rng.uniform();
  for (std::size_t i = 0; i < pi.mass.size(); ++i) pi.mass[i] = (1 - t) * pi.mass[i] + t * vert.mass[i];
  return pi;
}

inline std::vector<Check> run_selftest_checks(const std::string& inject) {
  std::vector<Check> checks;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  SolverConfig cfg;
  cfg.restarts = 4;

  {
    Check c{"closed_form_two_point"};
    for (double p : {0.25, 0.5})
      for (double R : {1.0, 3.0})
        for (int r = 1; r <= 2; ++r)
          for (int k = 1; k <= 2; ++k) {
            const DiscreteMeasure mu(1, {{0.0}, {R}}, {1 - p, p});
            const DiscreteMeasure nu(1, {{0.0}}, {1.0});
            const double want = lower_bound_exact(p, R, r, k);
            const double got = compute_gw(mu, nu, r, k, cfg).value;
            if (std::abs(got - want) > 1e-9 * want) {
              c.passed = false;
              c.detail = "p=" + std::to_string(p) + " R=" + std::to_string(R) + ": got " + std::to_string(got);
            }
          }
    checks.push_back(c);
  }

  {
    Check c{"decomposition_identity"};
    Rng rng(101);
    for (int rep = 0; rep < 12 && c.passed; ++rep) {
      const int r = 1 + rep % 2, k = 1 + (rep / 2) % 2;
      const auto mu = random_measure(rng, 1 + rep % 2, 3), nu = random_measure(rng, 1 + rep % 3, 4);
      KernelExpansion exp = *cached_expansion(r, k, mu.dim(), nu.dim());
      if (inject == "expansion") exp.terms[exp.terms.size() / 2].coeff += 1.0;
      for (int t = 0; t < 3; ++t) {
        const auto pi = random_coupling(rng, mu, nu);
        const double lhs = marginal_value(exp, mu, nu) + coupling_value_direct(exp, mu, nu, pi);
        const double rhs = gw_objective_bruteforce(mu, nu, pi, r, k);
        if (rel(lhs, rhs) > 1e-9) {
          c.passed = false;
          c.detail = "M + Q = " + std::to_string(lhs) + " but the kernel double sum is " + std::to_string(rhs) + " at " +
                     config_name(r, k, mu.dim(), nu.dim());
          break;
        }
      }
    }
    checks.push_back(c);
  }

  {
    Check c{"signed_eigen_identity"};
    Rng rng(102);
    for (int rep = 0; rep < 6 && c.passed; ++rep) {
      const int r = 1, k = 1 + rep % 2;
      const auto mu = random_measure(rng, 2, 3), nu = random_measure(rng, 1, 3);
      auto setup = cached_dual_setup(r, k, 2, 1);
      GWProblem p(mu, nu, setup.expansion, setup.form);
      const auto pi = random_coupling(rng, mu, nu);
      const auto vals = polynomial_values(*setup.polys, p.design(), p.cells());
      double s = 0;
      for (std::size_t i = 0; i < setup.polys->count(); ++i) {
        double integral = 0;
        for (std::size_t cell = 0; cell < p.cells(); ++cell) integral += pi.mass[cell] * vals[i * p.cells() + cell];
        s += (i < setup.polys->ell ? 1.0 : -1.0) * integral * integral;
      }
      if (rel(s, p.coupling_value(pi)) > 1e-8) {
        c.passed = false;
        c.detail = "signed sum " + std::to_string(s) + " vs Q " + std::to_string(p.coupling_value(pi));
      }
    }
    checks.push_back(c);
  }

  {
    Check t{"translation_invariance"}, d{"dilation_covariance"};
    Rng rng(103);
    for (int rep = 0; rep < 3; ++rep) {
      const int r = 1 + rep % 2, k = 1;
      const auto mu = random_measure(rng, 2, 3), nu = random_measure(rng, 1, 3);
      const double base = compute_gw(mu, nu, r, k, cfg).value;
      const double moved = compute_gw(mu.transformed(1.0, {2.0, -1.0}), nu.transformed(1.0, {4.0}), r, k, cfg).value;
      if (rel(moved, base) > 1e-9) {
        t.passed = false;
        t.detail = std::to_string(moved) + " vs " + std::to_string(base);
      }
      const double lam = 2.0;
      const double scaled = compute_gw(mu.transformed(lam, {0, 0}), nu.transformed(lam, {0}), r, k, cfg).value;
      const double want = std::pow(lam, 4 * k * r) * base;
      if (std::abs(scaled - want) > 1e-8 * std::max(1e-12, want)) {
        d.passed = false;
        d.detail = std::to_string(scaled) + " vs " + std::to_string(want);
      }
    }
    checks.push_back(t);
    checks.push_back(d);
  }

  {
    Check c{"oracle_2x2"};
    Rng rng(104);
    for (int rep = 0; rep < 5 && c.passed; ++rep) {
      const auto np = normalize_pair(random_measure(rng, 2, 2), random_measure(rng, 1, 2));
      auto setup = cached_dual_setup(1, 1, 2, 1);
      GWProblem p(np.mu, np.nu, setup.expansion, setup.form);
      const double oracle = solve_brute_force(p).value;
      const double fw = solve_frank_wolfe(p, cfg).value;
      const auto fam = attach_boxes(setup.polys, np.mu.atoms(), np.nu.atoms());
      const double dual = solve_dual_alternating(p, fam, cfg).value;
      if (std::abs(fw - oracle) > 1e-6 || std::abs(dual - oracle) > 1e-6) {
        c.passed = false;
        c.detail = "oracle " + std::to_string(oracle) + ", frank-wolfe " + std::to_string(fw) + ", dual " + std::to_string(dual);
      }
    }
    checks.push_back(c);
  }

  {
    Check c{"ot_certificates"};
    Rng rng(105);
    for (int rep = 0; rep < 20 && c.passed; ++rep) {
      const auto mu = random_measure(rng, 1, 2 + rep % 4), nu = random_measure(rng, 1, 2 + rep % 3);
      Matrix cost(mu.size(), nu.size());
      for (auto& v : cost.data) v = rng.uniform(-1, 1);
      const auto s = solve_ot(cost, mu.weights(), nu.weights());
      if (std::abs(s.dual_value(mu.weights(), nu.weights()) - s.value) > 1e-9 ||
          s.plan.marginal_error(mu.weights(), nu.weights()) > 1e-10) {
        c.passed = false;
        c.detail = "duality gap or marginal violation on instance " + std::to_string(rep);
      }
    }
    checks.push_back(c);
  }

  {
    Check c{"self_distance"};
    Rng rng(106);
    for (int r = 1; r <= 2; ++r)
      for (int k = 1; k <= 2; ++k) {
        const auto mu = random_measure(rng, 2, 4);
        const double v = compute_gw(mu, mu, r, k, cfg).value;
        if (v > 1e-8) {
          c.passed = false;
          c.detail = "D(mu, mu) = " + std::to_string(v);
        }
      }
    checks.push_back(c);
  }
  return checks;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int run_compute(const CliConfig& c, std::ostream& out, std::ostream& err) {
  if (c.mu_path.empty() || c.nu_path.empty()) throw InvalidArgument("compute needs --mu and --nu");
  const auto mu = io::read_measure_file(c.mu_path);
  const auto nu = io::read_measure_file(c.nu_path);
  if (!c.quiet) err << "computing D_{" << c.r << "," << c.k << "} for " << mu.size() << " x " << nu.size() << " atoms\n";
  const auto res = compute_gw(mu, nu, c.r, c.k, c.solver());
  out.precision(17);
  out << "value " << res.value << "\nmethod " << to_string(res.method) << "\n";
  if (!c.out_path.empty()) {
    auto doc = io::to_json(res);
    doc["config"] = to_json(c);
    detail::emit(c.out_path, doc, out);
  }
  return kExitOk;
}

inline int run_decompose(const CliConfig& c, std::ostream& out, std::ostream& err) {
  if (!c.quiet) err << "expanding " << config_name(c.r, c.k, c.dx, c.dy) << "\n";
  ExpansionOptions eopt;
  eopt.term_cap = c.term_cap;
  const auto setup = cached_dual_setup(c.r, c.k, c.dx, c.dy, 1e-9, eopt);
  std::optional<DualCostFamily> fam;
  if (!c.mu_path.empty() && !c.nu_path.empty()) {
    const auto mu = io::read_measure_file(c.mu_path), nu = io::read_measure_file(c.nu_path);
    if (mu.dim() != c.dx || nu.dim() != c.dy)
      throw DimensionMismatch("measure dimensions " + std::to_string(mu.dim()) + "," + std::to_string(nu.dim()) +
                              " do not match --dx " + std::to_string(c.dx) + " --dy " + std::to_string(c.dy));
    fam = attach_boxes(setup.polys, mu.atoms(), nu.atoms());
  } else if (!c.mu_path.empty() || !c.nu_path.empty()) {
    throw InvalidArgument("boxes need both --mu and --nu");
  }
  const auto& sp = *setup.polys;
  double lmin = 0, lmax = 0;
  for (double v : sp.eigvals) {
    lmin = std::min(lmin, v);
    lmax = std::max(lmax, v);
  }
  out.precision(17);
  out << "terms " << setup.expansion->terms.size() << "\nmarginal_terms " << setup.expansion->marginal_term_count()
      << "\nbasis " << setup.form->size() << "\nJ " << sp.count() << "\nell " << sp.ell << "\nnegative "
      << sp.count() - sp.ell << "\neigen_max " << lmax << "\neigen_min " << lmin << "\n";
  if (!fam) out << "boxes omitted: no supports given\n";
  if (!c.out_path.empty()) {
    io::json doc = io::document("decomposition");
    doc["config"] = to_json(c);
    doc["expansion"] = io::to_json(*setup.expansion);
    doc["dual_cost_family"] = io::to_json(sp, fam ? &*fam : nullptr);
    detail::emit(c.out_path, doc, out);
  }
  return kExitOk;
}

inline int run_rate(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const auto dx = DistributionSpec::parse(c.dist_x), dy = DistributionSpec::parse(c.dist_y);
  RateResult res;
  const auto t0 = std::chrono::steady_clock::now();
  if (c.estimator == "gw") {
    RateExperiment e;
    e.r = c.r;
    e.k = c.k;
    e.dist_x = dx;
    e.dist_y = dy;
    e.n_grid = c.n_grid;
    e.trials = c.trials;
    e.seed = c.seed;
    e.reference = parse_reference(c.reference);
    e.solver = c.solver();
    e.threads = c.threads;
    res = run_rate_experiment(e);
  } else if (c.estimator == "marginal") {
    res = marginal_rate_experiment(c.r, c.k, dx, dy, c.n_grid, c.trials, c.seed, c.threads);
  } else {
    throw InvalidArgument("--estimator must be gw or marginal, got '" + c.estimator + "'");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!c.quiet) err << "rate experiment finished in " << secs << " s\n";
  out.precision(6);
  for (std::size_t g = 0; g < res.n_grid.size(); ++g) out << "n " << res.n_grid[g] << " mean_error " << res.mean_errors[g] << "\n";
  if (res.slope_defined)
    out << "slope " << res.fitted_slope << " +/- " << res.slope_ci_halfwidth << " (predicted " << res.predicted_slope << ")\n";
  else
    out << "slope undefined\n";
  for (const auto& n : res.notes) out << "note: " << n << "\n";
  if (!c.csv_path.empty()) {
    std::ostringstream csv;
    io::write_rate_csv(csv, res);
    io::write_file(c.csv_path, csv.str());
  }
  if (!c.out_path.empty()) {
    auto doc = io::to_json(res);
    doc["config"] = to_json(c);
    detail::emit(c.out_path, doc, out);
  }
  return kExitOk;
}

inline int run_selftest(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = detail::run_selftest_checks(c.inject);
  bool ok = true;
  for (const auto& ch : checks) {
    out << (ch.passed ? "PASS " : "FAIL ") << ch.name;
    if (!ch.passed) out << ": " << ch.detail;
    out << "\n";
    ok = ok && ch.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!c.quiet) err << "selftest took " << secs << " s\n";
  return ok ? kExitOk : kExitSelftest;
}

/// Parses argv and runs the chosen subcommand; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CliConfig c;
  if (const char* env = std::getenv("EVENGW_SEED")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      err << "error: EVENGW_SEED='" << env << "' is not an unsigned integer\n";
      return kExitInput;
    }
  }

  CLI::App app{"Even-order Gromov-Wasserstein toolkit"};
  app.require_subcommand(1);
  auto* compute = app.add_subcommand("compute", "D_{r,k} between two measure files");
  auto* decompose = app.add_subcommand("decompose", "kernel expansion and dual cost family for (r, k, d_x, d_y)");
  auto* rate = app.add_subcommand("rate", "Monte-Carlo plug-in error experiment");
  auto* selftest = app.add_subcommand("selftest", "fast consistency checks");
  std::string grid_text;
  bool no_dual = false;

  for (auto* sub : {compute, decompose, rate, selftest}) {
    sub->add_option("--config", c.config_path, "JSON file of settings; flags take precedence");
    sub->add_option("--seed", c.seed, "random seed (default EVENGW_SEED or 0)");
    sub->add_flag("--quiet", c.quiet, "no progress on standard error");
  }
  for (auto* sub : {compute, decompose, rate}) {
    sub->add_option("--r", c.r, "exponent r >= 1");
    sub->add_option("--k", c.k, "exponent k >= 1");
    sub->add_option("--out", c.out_path, "JSON output path ('-' for standard output)");
    sub->add_option("--term-cap", c.term_cap, "maximum number of kernel terms");
  }
  for (auto* sub : {compute, rate}) {
    sub->add_option("--restarts", c.restarts, "solver restarts");
    sub->add_option("--max-iters", c.max_iters, "iterations per restart");
    sub->add_flag("--no-dual", no_dual, "skip the dual-alternating solver");
  }
  for (auto* sub : {compute, decompose}) {
    sub->add_option("--mu", c.mu_path, "first measure (.json or .csv)");
    sub->add_option("--nu", c.nu_path, "second measure (.json or .csv)");
  }
  decompose->add_option("--dx", c.dx, "dimension of the first space");
  decompose->add_option("--dy", c.dy, "dimension of the second space");
  rate->add_option("--threads", c.threads, "worker threads");
  rate->add_option("--n-grid", grid_text, "sample sizes, e.g. 32,64,128");
  rate->add_option("--trials", c.trials, "trials per sample size");
  rate->add_option("--dist-x", c.dist_x, "e.g. uniform-cube:2:1, uniform-ball:3:1, two-point:1:1:0.25, point-mass:1");
  rate->add_option("--dist-y", c.dist_y, "distribution of the second sample");
  rate->add_option("--reference", c.reference, "closed_form, self_zero or high_n_estimate");
  rate->add_option("--estimator", c.estimator, "gw (full value) or marginal (marginal term only)");
  rate->add_option("--csv", c.csv_path, "per-trial errors as CSV (n,trial,error)");
  selftest->add_option("--inject", c.inject, "fault injection for testing the selftest itself")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  CLI::App* sub = app.get_subcommands().front();
  c.subcommand = sub->get_name();
  try {
    if (!c.config_path.empty()) detail::apply_config_file(c, *sub);
    if (!grid_text.empty()) c.n_grid = detail::parse_grid(grid_text);
    if (no_dual) c.use_dual = false;
    detail::validate(c);
    if (!c.quiet) err << "effective config: " << to_json(c).dump() << "\n";
    if (c.subcommand == "compute") return run_compute(c, out, err);
    if (c.subcommand == "decompose") return run_decompose(c, out, err);
    if (c.subcommand == "rate") return run_rate(c, out, err);
    return run_selftest(c, out, err);
  } catch (const CapExceeded& e) {
    err << "error: " << e.what() << "\n";
    return kExitCap;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace evengw::cli

#endif  // EVENGW_CLI_HPP
