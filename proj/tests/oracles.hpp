#pragma once

// Reference computations that share no code with the solvers under test.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "zoloto/lp.hpp"
#include "zoloto/measure.hpp"
#include "zoloto/transport_plans.hpp"
#include "zoloto/zolotarev.hpp"

namespace oracle {

using zoloto::Atom;
using zoloto::DiscreteMeasure;
using zoloto::Point;

inline Point p1(double v) { return Point::Constant(1, v); }

inline DiscreteMeasure line(std::vector<double> xs, std::vector<double> ws) {
  return DiscreteMeasure::on_line(xs, ws);
}

/// Standard normal quantile by bisection on the error function.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Squared W2 between two uniform measures on n points each, by trying
/// every assignment.
inline double assignment_w2_sq(const std::vector<Point>& xs, std::vector<Point> ys) {
  std::vector<int> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) c += (xs[i] - ys[perm[i]]).squaredNorm();
    best = std::min(best, c / static_cast<double>(xs.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Squared W2 from the generic simplex on the dense transportation LP.
inline double lp_w2_sq(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const int m = static_cast<int>(mu.size()), n = static_cast<int>(nu.size());
  zoloto::lp::Problem prob(m + n);
  for (int i = 0; i < m; ++i) prob.set_rhs(i, mu[i].w);
  for (int j = 0; j < n; ++j) prob.set_rhs(m + j, nu[j].w);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) prob.add_column((mu[i].x - nu[j].x).squaredNorm(), {{i, 1.0}, {m + j, 1.0}});
  const auto sol = zoloto::lp::solve(prob);
  return sol.objective;
}

/// 1D convex order through call prices: same mean and
/// E_nu (X - k)^+ >= E_mu (X - k)^+ at every atom k of either measure.
inline bool convex_order_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = 1e-12) {
  auto mean = [](const DiscreteMeasure& m) {
    double s = 0.0;
    for (const auto& a : m.atoms()) s += a.w * a.x[0];
    return s;
  };
  auto call = [](const DiscreteMeasure& m, double k) {
    double s = 0.0;
    for (const auto& a : m.atoms()) s += a.w * std::max(0.0, a.x[0] - k);
    return s;
  };
  if (std::abs(mean(mu) - mean(nu)) > tol) return false;
  for (const auto* m : {&mu, &nu})
    for (const auto& a : m->atoms())
      if (call(nu, a.x[0]) < call(mu, a.x[0]) - tol) return false;
  return true;
}

/// Variance computed directly from the atoms.
inline double variance(const DiscreteMeasure& m) {
  Point c = Point::Zero(static_cast<Eigen::Index>(m.dim()));
  for (const auto& a : m.atoms()) c += a.w * a.x;
  double v = 0.0;
  for (const auto& a : m.atoms()) v += a.w * (a.x - c).squaredNorm();
  return v;
}

/// A valid 3-plan together with its marginals. x- and y-atoms are the
/// conditional barycentres of random z-atoms, so both martingale
/// conditions hold by construction.
struct PlanSample {
  zoloto::ThreePlan plan;
  DiscreteMeasure mu, nu;
};

inline PlanSample random_plan(std::mt19937_64& rng, std::size_t d, int A, int B, int K) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(0.05, 1.0);
  std::vector<Point> z(K);
  for (auto& p : z) p = Point::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return 2.0 * unit(rng); });
  std::vector<double> w(static_cast<std::size_t>(A * B * K));
  double total = 0.0;
  for (auto& v : w) total += (v = pos(rng) * (unit(rng) > 0.0 ? 1.0 : 0.05));
  for (auto& v : w) v /= total;
  auto at = [&](int a, int b, int k) { return w[static_cast<std::size_t>((a * B + b) * K + k)]; };

  std::vector<Point> xs(A, Point::Zero(d)), ys(B, Point::Zero(d));
  std::vector<double> wa(A, 0.0), wb(B, 0.0);
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < K; ++k) {
        xs[a] += at(a, b, k) * z[k];
        ys[b] += at(a, b, k) * z[k];
        wa[a] += at(a, b, k);
        wb[b] += at(a, b, k);
      }
  for (int a = 0; a < A; ++a) xs[a] /= wa[a];
  for (int b = 0; b < B; ++b) ys[b] /= wb[b];

  PlanSample s;
  std::vector<Atom> am, an;
  for (int a = 0; a < A; ++a) am.push_back({xs[a], wa[a]});
  for (int b = 0; b < B; ++b) an.push_back({ys[b], wb[b]});
  s.mu = DiscreteMeasure(d, am);
  s.nu = DiscreteMeasure(d, an);
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < K; ++k) s.plan.triples.push_back({xs[a], ys[b], z[k], at(a, b, k)});
  return s;
}

/// Restriction to `points` of u(x) = x'Ax/2 + b'x + c + alpha sin(w'x + phi)
/// with |A| + alpha |w|^2 <= 0.9, so grad u is 0.9-Lipschitz and every
/// pairwise constraint is strictly negative.
inline zoloto::OneField random_smooth_field(std::mt19937_64& rng, const std::vector<Point>& points) {
  const auto d = points.front().size();
  std::uniform_real_distribution<double> unit(-1.0, 1.0), frac(0.0, 1.0);
  Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return unit(rng); });
  Eigen::MatrixXd A = 0.5 * (M + M.transpose());
  const double budget = 0.9;
  const double split = frac(rng);
  const double norm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues().cwiseAbs().maxCoeff();
  if (norm > 0.0) A *= split * budget / norm;
  Point b = Point::NullaryExpr(d, [&] { return unit(rng); });
  const double c = unit(rng);
  Point w = Point::NullaryExpr(d, [&] { return unit(rng); });
  const double alpha = (1.0 - split) * budget / std::max(1e-12, w.squaredNorm());
  const double phi = 3.0 * unit(rng);

  zoloto::OneField f;
  for (const auto& x : points) {
    const double t = w.dot(x) + phi;
    f.points.push_back(x);
    f.values.push_back(0.5 * x.dot(A * x) + b.dot(x) + c + alpha * std::sin(t));
    f.gradients.push_back(A * x + b + alpha * std::cos(t) * w);
  }
  return f;
}

/// nu obtained from mu by splitting every atom into a mean-preserving
/// spread, so nu dominates mu in convex order.
inline DiscreteMeasure spread(const DiscreteMeasure& mu, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0), frac(0.2, 0.8);
  std::vector<Atom> out;
  for (const auto& a : mu.atoms()) {
    const Point v = Point::NullaryExpr(static_cast<Eigen::Index>(mu.dim()), [&] { return scale * unit(rng); });
    const double t = frac(rng);
    // t at x + (1-t) v', (1-t) at x - t v'  keeps the mean at x.
    out.push_back({a.x + (1.0 - t) * v, a.w * t});
    out.push_back({a.x - t * v, a.w * (1.0 - t)});
  }
  return DiscreteMeasure(mu.dim(), out);
}

}  // namespace oracle
