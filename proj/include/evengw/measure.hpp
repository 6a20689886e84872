#ifndef EVENGW_MEASURE_HPP
#define EVENGW_MEASURE_HPP

// Finitely supported probability measures on R^d, seeded sampling, and the
// centering / rescaling used to bring a pair of measures into the unit ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evengw/error.hpp"
#include "evengw/multi_index.hpp"
#include "evengw/random.hpp"

namespace evengw {

using Point = std::vector<double>;

inline constexpr double kMassTolerance = 1e-12;

class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// Validates: dim >= 1, one weight per atom, weights >= 0 summing to 1.
  DiscreteMeasure(std::size_t dim, std::vector<Point> atoms, std::vector<double> weights)
      : dim_(dim), atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (dim_ == 0) throw InvalidArgument("measure dimension must be positive");
    if (atoms_.empty()) throw InvalidArgument("measure must have at least one atom");
    if (atoms_.size() != weights_.size())
      throw InvalidArgument("measure has " + std::to_string(atoms_.size()) + " atoms but " +
                            std::to_string(weights_.size()) + " weights");
    long double total = 0.0;  // long double keeps 1/n weights exact enough for large n
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (atoms_[i].size() != dim_)
        throw DimensionMismatch("atom " + std::to_string(i) + " has " +
                                std::to_string(atoms_[i].size()) + " coordinates, expected " +
                                std::to_string(dim_));
      for (double c : atoms_[i])
        if (!std::isfinite(c)) throw InvalidArgument("atom " + std::to_string(i) + " is not finite");
      if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i]))
        throw InvalidArgument("weight " + std::to_string(i) + " is negative or not finite");
      total += weights_[i];
    }
    if (std::abs(static_cast<double>(total) - 1.0) > kMassTolerance) {
      std::ostringstream os;
      os.precision(17);
      os << "weights sum to " << total << ", expected 1";
      throw InvalidArgument(os.str());
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<Point>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const Point& atom(std::size_t i) const { return atoms_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  Point mean() const {
    Point m(dim_, 0.0);
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      for (std::size_t j = 0; j < dim_; ++j) m[j] += weights_[i] * atoms_[i][j];
    return m;
  }

  /// Image under x -> (x - shift) / scale.
  DiscreteMeasure affine_image(const Point& shift, double scale) const {
    std::vector<Point> out = atoms_;
    for (auto& a : out)
      for (std::size_t j = 0; j < dim_; ++j) a[j] = (a[j] - shift[j]) / scale;
    return DiscreteMeasure(dim_, std::move(out), weights_);
  }

  /// Image under x -> lambda * x + offset.
  DiscreteMeasure transformed(double lambda, const Point& offset) const {
    std::vector<Point> out = atoms_;
    for (auto& a : out)
      for (std::size_t j = 0; j < dim_; ++j) a[j] = lambda * a[j] + offset[j];
    return DiscreteMeasure(dim_, std::move(out), weights_);
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Point> atoms_;
  std::vector<double> weights_;
};

inline double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

inline double diameter(const DiscreteMeasure& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      best = std::max(best, squared_distance(m.atom(i), m.atom(j)));
  return std::sqrt(best);
}

/// Uniform weights on the given points; duplicates stay separate atoms.
inline DiscreteMeasure empirical_from_samples(const std::vector<Point>& points) {
  if (points.empty()) throw InvalidArgument("cannot build an empirical measure from no samples");
  const std::size_t dim = points.front().size();
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].size() != dim)
      throw DimensionMismatch("sample " + std::to_string(i) + " has dimension " +
                              std::to_string(points[i].size()) + ", expected " +
                              std::to_string(dim));
  const double w = 1.0 / static_cast<double>(points.size());
  return DiscreteMeasure(dim, points, std::vector<double>(points.size(), w));
}

/// Merge coincident atoms, summing their weights. Atoms keep first-seen order.
/// `owner[i]` receives the merged index of original atom i.
inline DiscreteMeasure merge_duplicates(const DiscreteMeasure& m, std::vector<std::size_t>* owner = nullptr) {
  std::map<Point, std::size_t> index;
  std::vector<Point> atoms;
  std::vector<double> weights;
  std::vector<std::size_t> own(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto [it, inserted] = index.try_emplace(m.atom(i), atoms.size());
    if (inserted) {
      atoms.push_back(m.atom(i));
      weights.push_back(0.0);
    }
    weights[it->second] += m.weight(i);
    own[i] = it->second;
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  if (owner) *owner = std::move(own);
  return DiscreteMeasure(m.dim(), std::move(atoms), std::move(weights));
}

/// Maps between original and normalized coordinates: x = scale * z + shift.
struct NormalizationRecord {
  Point shift;
  double scale = 1.0;
  double original_radius = 0.0;

  Point to_original(const Point& z) const {
    Point x(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) x[j] = scale * z[j] + shift[j];
    return x;
  }
  Point to_normalized(const Point& x) const {
    Point z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - shift[j]) / scale;
    return z;
  }
};

inline std::pair<DiscreteMeasure, NormalizationRecord> center(const DiscreteMeasure& m) {
  NormalizationRecord rec{m.mean(), 1.0, 0.0};
  return {m.affine_image(rec.shift, 1.0), rec};
}

struct NormalizedPair {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  NormalizationRecord mu_record;
  NormalizationRecord nu_record;
  /// Both supports are single points (R = 0); measures are centered, scale 1.
  bool degenerate = false;

  /// R = max(diam supp mu, diam supp nu).
  double radius() const noexcept { return mu_record.original_radius; }
};

/// Center both measures and divide by 2R so every atom lies in the closed unit ball.
inline NormalizedPair normalize_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const double radius = std::max(diameter(mu), diameter(nu));
  NormalizedPair out;
  out.mu_record = NormalizationRecord{mu.mean(), 1.0, radius};
  out.nu_record = NormalizationRecord{nu.mean(), 1.0, radius};
  if (radius == 0.0) {
    out.degenerate = true;
  } else {
    out.mu_record.scale = 2.0 * radius;
    out.nu_record.scale = 2.0 * radius;
  }
  out.mu = mu.affine_image(out.mu_record.shift, out.mu_record.scale);
  out.nu = nu.affine_image(out.nu_record.shift, out.nu_record.scale);
  return out;
}

/// sum_i w_i * atom_i^alpha.
inline double moment(const DiscreteMeasure& m, const MultiIndex& alpha) {
  if (alpha.dim() != m.dim())
    throw DimensionMismatch("multi-index has " + std::to_string(alpha.dim()) +
                            " components, measure dimension is " + std::to_string(m.dim()));
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * monomial(m.atom(i), alpha);
  return s;
}

// ---------------------------------------------------------------------------
// Sampling

struct DistributionSpec {
  enum class Kind { UniformBall, UniformCube, TwoPoint, PointMass };

  Kind kind = Kind::PointMass;
  std::size_t dim = 1;
  /// Radius (ball), half-width (cube) or R (two-point).
  double scale = 1.0;
  /// Probability of the far atom R*e_1 (two-point only).
  double p = 0.5;

  static DistributionSpec uniform_ball(std::size_t d, double radius) {
    return {Kind::UniformBall, d, radius, 0.0};
  }
  static DistributionSpec uniform_cube(std::size_t d, double half_width) {
    return {Kind::UniformCube, d, half_width, 0.0};
  }
  static DistributionSpec two_point(std::size_t d, double R, double p) { return {Kind::TwoPoint, d, R, p}; }
  static DistributionSpec point_mass(std::size_t d) { return {Kind::PointMass, d, 0.0, 0.0}; }

  /// Textual form used by the CLI: "uniform-ball:d:radius", "uniform-cube:d:half",
  /// "two-point:d:R:p", "point-mass:d".
  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case Kind::UniformBall: os << "uniform-ball:" << dim << ':' << scale; break;
      case Kind::UniformCube: os << "uniform-cube:" << dim << ':' << scale; break;
      case Kind::TwoPoint: os << "two-point:" << dim << ':' << scale << ':' << p; break;
      case Kind::PointMass: os << "point-mass:" << dim; break;
    }
    return os.str();
  }

  static DistributionSpec parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    auto bad = [&](const std::string& why) {
      return InvalidArgument("bad distribution spec '" + text + "': " + why);
    };
    if (parts.size() < 2) throw bad("expected name:dim[:params]");
    auto num = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw bad("'" + s + "' is not a number");
      }
      if (used != s.size()) throw bad("'" + s + "' is not a number");
      return v;
    };
    const double dval = num(parts[1]);
    if (dval < 1 || dval != std::floor(dval)) throw bad("dimension must be a positive integer");
    const auto d = static_cast<std::size_t>(dval);
    const std::string& name = parts[0];
    if (name == "uniform-ball" || name == "uniform-cube") {
      if (parts.size() != 3) throw bad("expected " + name + ":d:size");
      const double s = num(parts[2]);
      if (!(s > 0)) throw bad("size must be positive");
      return name == "uniform-ball" ? uniform_ball(d, s) : uniform_cube(d, s);
    }
    if (name == "two-point") {
      if (parts.size() != 4) throw bad("expected two-point:d:R:p");
      const double R = num(parts[2]), p = num(parts[3]);
      if (!(R > 0)) throw bad("R must be positive");
      if (!(p >= 0 && p <= 1)) throw bad("p must lie in [0,1]");
      return two_point(d, R, p);
    }
    if (name == "point-mass") {
      if (parts.size() != 2) throw bad("expected point-mass:d");
      return point_mass(d);
    }
    throw bad("unknown distribution '" + name + "'");
  }
};

inline Point draw(const DistributionSpec& spec, Rng& rng) {
  Point x(spec.dim, 0.0);
  switch (spec.kind) {
    case DistributionSpec::Kind::UniformBall: {
      double norm2 = 0.0;
      for (auto& c : x) {
        c = rng.normal();
        norm2 += c * c;
      }
      const double radius = spec.scale * std::pow(rng.uniform(), 1.0 / static_cast<double>(spec.dim));
      const double f = norm2 > 0 ? radius / std::sqrt(norm2) : 0.0;
      for (auto& c : x) c *= f;
      break;
    }
    case DistributionSpec::Kind::UniformCube:
      for (auto& c : x) c = rng.uniform(-spec.scale, spec.scale);
      break;
    case DistributionSpec::Kind::TwoPoint:
      if (rng.bernoulli(spec.p)) x[0] = spec.scale;
      break;
    case DistributionSpec::Kind::PointMass:
      break;
  }
  return x;
}

/// n i.i.d. draws as an empirical measure; bit-identical for equal (spec, n, seed).
inline DiscreteMeasure sample(const DistributionSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("sample size must be at least 1");
  if (spec.dim == 0) throw InvalidArgument("distribution dimension must be positive");
  Rng rng(seed);
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(draw(spec, rng));
  return empirical_from_samples(pts);
}

/// The population measure itself when it is finitely supported (two-point, point mass).
inline DiscreteMeasure population_measure(const DistributionSpec& spec) {
  Point origin(spec.dim, 0.0);
  switch (spec.kind) {
    case DistributionSpec::Kind::PointMass:
      return DiscreteMeasure(spec.dim, {origin}, {1.0});
    case DistributionSpec::Kind::TwoPoint: {
      if (spec.p == 0.0) return DiscreteMeasure(spec.dim, {origin}, {1.0});
      Point far = origin;
      far[0] = spec.scale;
      if (spec.p == 1.0) return DiscreteMeasure(spec.dim, {far}, {1.0});
      return DiscreteMeasure(spec.dim, {origin, far}, {1.0 - spec.p, spec.p});
    }
    default:
      throw InvalidArgument("distribution " + spec.to_string() + " is not finitely supported");
  }
}

}  // namespace evengw

#endif  // EVENGW_MEASURE_HPP
