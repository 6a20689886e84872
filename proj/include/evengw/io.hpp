#ifndef EVENGW_IO_HPP
#define EVENGW_IO_HPP

// JSON documents (schema "evengw/1") and CSV measure files.
//
// CSV: one atom per line, comma separated. An optional header line names the
// columns; a column called "weight" holds weights, every other column is a
// coordinate. Without a weight column the measure is uniform. Lines starting
// with '#' and blank lines are skipped.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evengw/dual_construct.hpp"
#include "evengw/error.hpp"
#include "evengw/gw_solve.hpp"
#include "evengw/measure.hpp"
#include "evengw/ot_exact.hpp"
#include "evengw/poly_expand.hpp"
#include "evengw/rate_lab.hpp"

namespace evengw::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "evengw/1";

inline json document(const std::string& kind) {
  json j;
  j["schema"] = kSchema;
  j["kind"] = kind;
  return j;
}

// ---------------------------------------------------------------------------
// Measures

inline json to_json(const DiscreteMeasure& m) {
  json j = document("measure");
  j["dim"] = m.dim();
  j["atoms"] = m.atoms();
  j["weights"] = m.weights();
  return j;
}

inline DiscreteMeasure measure_from_json(const json& j, const std::string& where = "measure") {
  try {
    if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
    if (j.contains("schema") && j["schema"] != kSchema)
      throw InvalidArgument(where + ": unsupported schema " + j["schema"].dump());
    if (!j.contains("atoms")) throw InvalidArgument(where + ": missing 'atoms'");
    auto atoms = j.at("atoms").get<std::vector<Point>>();
    if (atoms.empty()) throw InvalidArgument(where + ": no atoms");
    const std::size_t dim = j.contains("dim") ? j.at("dim").get<std::size_t>() : atoms.front().size();
    std::vector<double> w;
    if (j.contains("weights")) {
      w = j.at("weights").get<std::vector<double>>();
    } else {
      w.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
    }
    return DiscreteMeasure(dim, std::move(atoms), std::move(w));
  } catch (const json::exception& e) {
    throw InvalidArgument(where + ": " + e.what());
  } catch (const DimensionMismatch& e) {
    throw DimensionMismatch(where + ": " + e.what());
  } catch (const InvalidArgument& e) {
    if (std::string(e.what()).rfind(where, 0) == 0) throw;
    throw InvalidArgument(where + ": " + e.what());
  }
}

inline DiscreteMeasure measure_from_csv(std::istream& in, const std::string& where = "csv") {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      const auto a = cell.find_first_not_of(" \t\r");
      const auto b = cell.find_last_not_of(" \t\r");
      out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return out;
  };
  auto parse_num = [](const std::string& s, double& v) {
    std::size_t used = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      return false;
    }
    return used == s.size();
  };

  std::vector<Point> atoms;
  std::vector<double> weights;
  std::ptrdiff_t weight_col = -1;
  std::size_t width = 0, lineno = 0;
  bool first = true;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto cells = split(line);
    std::vector<double> vals(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) numeric = numeric && parse_num(cells[c], vals[c]);
    if (first) {
      first = false;
      width = cells.size();
      if (!numeric) {
        for (std::size_t c = 0; c < cells.size(); ++c)
          if (cells[c] == "weight") {
            if (weight_col >= 0) throw InvalidArgument(where + ": header has two 'weight' columns");
            weight_col = static_cast<std::ptrdiff_t>(c);
          }
        continue;
      }
    }
    if (cells.size() != width)
      throw InvalidArgument(where + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) + " columns, got " +
                            std::to_string(cells.size()));
    if (!numeric) throw InvalidArgument(where + ":" + std::to_string(lineno) + ": non-numeric entry");
    Point p;
    for (std::size_t c = 0; c < vals.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == weight_col)
        weights.push_back(vals[c]);
      else
        p.push_back(vals[c]);
    }
    atoms.push_back(std::move(p));
  }
  if (atoms.empty()) throw InvalidArgument(where + ": no atoms");
  if (atoms.front().empty()) throw InvalidArgument(where + ": no coordinate columns");
  const std::size_t dim = atoms.front().size();
  if (weight_col < 0) return empirical_from_samples(atoms);
  try {
    return DiscreteMeasure(dim, std::move(atoms), std::move(weights));
  } catch (const DimensionMismatch& e) {
    throw DimensionMismatch(where + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  }
}

/// Reads a measure from a .json or .csv file (by extension; anything else is tried as CSV).
inline DiscreteMeasure read_measure_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open measure file '" + path + "'");
  if (std::filesystem::path(path).extension() == ".json") {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw InvalidArgument(path + ": " + e.what());
    }
    return measure_from_json(j, path);
  }
  return measure_from_csv(in, path);
}

// ---------------------------------------------------------------------------
// Artifacts

inline json to_json(const MultiIndex& a) { return a.components; }

inline json to_json(const Coupling& c) {
  json rows = json::array();
  for (std::size_t i = 0; i < c.rows; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < c.cols; ++j) row.push_back(c(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const KernelExpansion& e) {
  json j = document("kernel_expansion");
  j["r"] = e.r;
  j["k"] = e.k;
  j["d_x"] = e.d_x;
  j["d_y"] = e.d_y;
  j["term_count"] = e.terms.size();
  j["marginal_term_count"] = e.marginal_term_count();
  j["factor_count"] = e.factors.size();
  json terms = json::array();
  for (const auto& t : e.terms)
    terms.push_back({{"s", t.s},
                     {"alpha", to_json(t.alpha)},
                     {"beta", to_json(t.beta)},
                     {"gamma", to_json(t.gamma)},
                     {"delta", to_json(t.delta)},
                     {"coeff", t.coeff},
                     {"marginal_only", t.marginal_only}});
  j["terms"] = std::move(terms);
  return j;
}

/// The signed polynomial family; boxes only when the family carries them.
inline json to_json(const SignedPolynomials& sp, const DualCostFamily* fam = nullptr) {
  json j = document("dual_cost_family");
  j["basis_size"] = sp.basis->size();
  j["J"] = sp.count();
  j["ell"] = sp.ell;
  j["eigenvalues"] = sp.eigvals;
  json basis = json::array();
  for (const auto& [a, g] : sp.basis->entries) basis.push_back({{"alpha", to_json(a)}, {"gamma", to_json(g)}});
  j["basis"] = std::move(basis);
  json polys = json::array();
  for (const auto& p : sp.polys) {
    json terms = json::array();
    for (const auto& [idx, c] : p) terms.push_back({idx, c});
    polys.push_back(std::move(terms));
  }
  j["polynomials"] = std::move(polys);
  if (fam && fam->has_boxes()) {
    j["basis_sup"] = fam->basis_sup;
    j["box_plus"] = fam->box_plus;
    j["box_minus"] = fam->box_minus;
    j["lipschitz_constant"] = fam->lipschitz_constant();
  } else {
    j["boxes"] = nullptr;
    j["note"] = "no supports given, boxes omitted";
  }
  return j;
}

inline json to_json(const OTSolution& s) {
  json j = document("ot_solution");
  j["value"] = s.value;
  j["plan"] = to_json(s.plan);
  j["phi"] = s.phi;
  j["psi"] = s.psi;
  j["pivots"] = s.pivots;
  return j;
}

inline json to_json(const SolverConfig& c) {
  return {{"restarts", c.restarts},       {"max_iters", c.max_iters}, {"fw_tol", c.fw_tol},
          {"seed", c.seed},               {"oracle_grid_resolution", c.oracle_grid_resolution},
          {"zero_tol", c.zero_tol},       {"use_dual", c.use_dual},   {"box_scale", c.box_scale}};
}

inline json to_json(const GWResult& r) {
  json j = document("gw_result");
  j["value"] = r.value;
  j["marginal_part"] = r.marginal_part;
  j["coupling_part"] = r.coupling_part;
  j["method"] = to_string(r.method);
  j["degenerate"] = r.degenerate;
  j["converged"] = r.converged;
  j["restarts_used"] = r.restarts_used;
  j["iterations"] = r.iterations;
  j["dual_estimate"] = r.dual_estimate ? json(*r.dual_estimate) : json(nullptr);
  if (r.dual_params) j["dual_params"] = {{"u", r.dual_params->u}, {"v", r.dual_params->v}};
  j["plan"] = to_json(r.plan);
  return j;
}

inline json to_json(const RateResult& r) {
  json j = document("rate_summary");
  j["n_grid"] = r.n_grid;
  j["mean_errors"] = r.mean_errors;
  j["fitted_slope"] = r.slope_defined ? json(r.fitted_slope) : json(nullptr);
  j["slope_defined"] = r.slope_defined;
  j["predicted_slope"] = r.predicted_slope;
  j["ci"] = std::isfinite(r.slope_ci_halfwidth) ? json(r.slope_ci_halfwidth) : json(nullptr);
  j["spearman"] = std::isfinite(r.spearman) ? json(r.spearman) : json(nullptr);
  j["reference_value"] = r.reference_value;
  j["reference_is_estimate"] = r.reference_is_estimate;
  j["cross_checks"] = r.cross_checks;
  j["notes"] = r.notes;
  return j;
}

/// Columns n, trial, error.
inline void write_rate_csv(std::ostream& out, const RateResult& r) {
  out << "n,trial,error\n";
  out.precision(17);
  for (std::size_t g = 0; g < r.n_grid.size(); ++g)
    for (std::size_t t = 0; t < r.per_n_errors[g].size(); ++t) out << r.n_grid[g] << ',' << t << ',' << r.per_n_errors[g][t] << '\n';
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidArgument("write to '" + path + "' failed");
}

}  // namespace evengw::io

#endif  // EVENGW_IO_HPP
