#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "zoloto/errors.hpp"

namespace zoloto {

using Point = Eigen::VectorXd;

struct Atom {
  Point x;
  double w = 0.0;
};

struct MeasureStats {
  Point barycentre;
  double variance = 0.0;
  double std_dev = 0.0;
};

/// Atoms closer than this are the same atom.
inline constexpr double kMergeTolerance = 1e-12;
/// Largest |sum(w) - 1| accepted before renormalization.
inline constexpr double kMassTolerance = 1e-9;

/// Finitely supported probability measure on R^d.
///
/// Construction validates the atoms, merges coincident positions by adding
/// their weights, and renormalizes the total mass to one. Instances are
/// immutable afterwards.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  DiscreteMeasure(std::size_t dim, std::vector<Atom> atoms) : dim_(dim) {
    if (dim == 0) throw InvalidMeasure("dimension must be positive");
    if (atoms.empty()) throw InvalidMeasure("measure has no atoms");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (static_cast<std::size_t>(a.x.size()) != dim)
        throw InvalidMeasure("atom position has length " + std::to_string(a.x.size()) +
                             ", expected " + std::to_string(dim));
      if (!a.x.allFinite()) throw InvalidMeasure("atom position is not finite");
      if (!(a.w > 0.0) || !std::isfinite(a.w)) throw InvalidMeasure("atom weight must be positive");
      total += a.w;
    }
    if (std::abs(total - 1.0) > kMassTolerance)
      throw InvalidMeasure("weights sum to " + std::to_string(total));

    for (auto& a : atoms) {
      a.w /= total;
      auto hit = std::find_if(atoms_.begin(), atoms_.end(), [&](const Atom& b) {
        return (b.x - a.x).norm() <= kMergeTolerance;
      });
      if (hit != atoms_.end())
        hit->w += a.w;
      else
        atoms_.push_back(std::move(a));
    }
  }

  /// Convenience for 1D measures: positions and weights side by side.
  static DiscreteMeasure on_line(std::span<const double> xs, std::span<const double> ws) {
    if (xs.size() != ws.size()) throw InvalidMeasure("positions and weights differ in length");
    std::vector<Atom> atoms;
    atoms.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) atoms.push_back({Point::Constant(1, xs[i]), ws[i]});
    return DiscreteMeasure(1, std::move(atoms));
  }

  static DiscreteMeasure dirac(const Point& x) { return DiscreteMeasure(x.size(), {{x, 1.0}}); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }

 private:
  std::size_t dim_ = 0;
  std::vector<Atom> atoms_;
};

inline void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
}

inline Point barycentre(const DiscreteMeasure& m) {
  Point c = Point::Zero(m.dim());
  for (const auto& a : m.atoms()) c += a.w * a.x;
  return c;
}

inline MeasureStats stats(const DiscreteMeasure& m) {
  MeasureStats s;
  s.barycentre = barycentre(m);
  for (const auto& a : m.atoms()) s.variance += a.w * (a.x - s.barycentre).squaredNorm();
  s.std_dev = std::sqrt(s.variance);
  return s;
}

inline DiscreteMeasure translate(const DiscreteMeasure& m, const Point& shift) {
  std::vector<Atom> atoms = m.atoms();
  for (auto& a : atoms) a.x += shift;
  return DiscreteMeasure(m.dim(), std::move(atoms));
}

inline DiscreteMeasure center(const DiscreteMeasure& m) { return translate(m, -barycentre(m)); }

/// Push-forward through x -> lambda * x (about the origin).
inline DiscreteMeasure dilate(const DiscreteMeasure& m, double lambda) {
  if (!(lambda > 0.0)) throw InvalidMeasure("dilation factor must be positive");
  std::vector<Atom> atoms = m.atoms();
  for (auto& a : atoms) a.x *= lambda;
  return DiscreteMeasure(m.dim(), std::move(atoms));
}

/// Midpoint-quantile discretization of N(0, sigma^2): n equal atoms at
/// sigma * Phi^{-1}((k - 1/2) / n). Symmetric quantiles are mirrored exactly.
inline DiscreteMeasure gaussian_quantile_discretize(double sigma, std::size_t n) {
  if (n == 0) throw InvalidMeasure("need at least one atom");
  if (!(sigma > 0.0)) throw InvalidMeasure("sigma must be positive");
  const boost::math::normal_distribution<double> standard;
  std::vector<double> xs(n, 0.0);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double p = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    const double q = sigma * boost::math::quantile(standard, p);
    xs[k] = q;
    xs[n - 1 - k] = -q;
  }
  std::vector<double> ws(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure::on_line(xs, ws);
}

struct GeneratorSpec {
  enum class Shape { box, ball };
  Shape shape = Shape::box;
  double radius = 1.0;          ///< half-width of the box or radius of the ball
  double dirichlet_alpha = 1.0; ///< symmetric Dirichlet concentration for the weights
  bool centre = false;          ///< translate the result to barycentre 0
};

/// Deterministic random measure: i.i.d. positions in a box or ball and
/// Dirichlet weights.
inline DiscreteMeasure random_measure(std::size_t dim, std::size_t n_atoms, std::uint64_t seed,
                                      const GeneratorSpec& spec = {}) {
  if (dim == 0 || n_atoms == 0) throw InvalidMeasure("dim and n_atoms must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::gamma_distribution<double> gamma(spec.dirichlet_alpha, 1.0);

  std::vector<Atom> atoms;
  atoms.reserve(n_atoms);
  for (std::size_t i = 0; i < n_atoms; ++i) {
    Point x(dim);
    if (spec.shape == GeneratorSpec::Shape::box) {
      for (std::size_t c = 0; c < dim; ++c) x[c] = spec.radius * unit(rng);
    } else {
      do {
        for (std::size_t c = 0; c < dim; ++c) x[c] = unit(rng);
      } while (x.squaredNorm() > 1.0);
      x *= spec.radius;
    }
    double w = 0.0;
    while (!(w > 1e-300)) w = gamma(rng);
    atoms.push_back({std::move(x), w});
  }
  const double total =
      std::accumulate(atoms.begin(), atoms.end(), 0.0, [](double s, const Atom& a) { return s + a.w; });
  for (auto& a : atoms) a.w /= total;
  DiscreteMeasure m(dim, std::move(atoms));
  return spec.centre ? center(m) : m;
}

/// Equality as atomic measures: greedy nearest-atom matching, positions and
/// weights compared within tol.
inline bool measures_equal(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol) {
  require_same_dim(a, b);

  // Merge atoms within tol on each side before matching.
  auto coarsen = [tol](const DiscreteMeasure& m) {
    std::vector<Atom> out;
    for (const auto& at : m.atoms()) {
      auto hit = std::find_if(out.begin(), out.end(),
                              [&](const Atom& o) { return (o.x - at.x).norm() <= tol; });
      if (hit != out.end())
        hit->w += at.w;
      else
        out.push_back(at);
    }
    return out;
  };
  const auto lhs = coarsen(a);
  const auto rhs = coarsen(b);
  if (lhs.size() != rhs.size()) return false;

  std::vector<bool> used(rhs.size(), false);
  for (const auto& at : lhs) {
    std::size_t best = rhs.size();
    double best_dist = 0.0;
    for (std::size_t j = 0; j < rhs.size(); ++j) {
      if (used[j]) continue;
      const double d = (rhs[j].x - at.x).norm();
      if (best == rhs.size() || d < best_dist) {
        best = j;
        best_dist = d;
      }
    }
    if (best == rhs.size() || best_dist > tol || std::abs(rhs[best].w - at.w) > tol) return false;
    used[best] = true;
  }
  return true;
}

}  // namespace zoloto
