#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "zoloto/lp.hpp"
#include "zoloto/measure.hpp"
#include "zoloto/wasserstein.hpp"
#include "zoloto/zolotarev.hpp"

namespace zoloto {

struct Triple {
  Point x, y, z;
  double m = 0.0;
};

/// Finitely supported probability on (R^d)^3.
struct ThreePlan {
  std::vector<Triple> triples;

  double total_mass() const {
    double s = 0.0;
    for (const auto& t : triples) s += t.m;
    return s;
  }
};

/// sum m (|z - x|^2 + |z - y|^2) / 2
inline double three_plan_cost(const ThreePlan& pi) {
  double c = 0.0;
  for (const auto& t : pi.triples) c += t.m * 0.5 * ((t.z - t.x).squaredNorm() + (t.z - t.y).squaredNorm());
  return c;
}

struct ValidationReport {
  double mass_residual = 0.0;        ///< |total mass - 1|
  double mu_marginal_residual = 0.0; ///< max atom-wise deviation of the first marginal from mu
  double nu_marginal_residual = 0.0;
  double martingale_x_residual = 0.0; ///< max_x,c |sum m (z - x)_c| over triples with that x
  double martingale_y_residual = 0.0;
  double min_mass = 0.0;
  bool valid = false;
};

inline constexpr double kPlanTolerance = 1e-8;

namespace detail {

/// Groups triple indices by a coordinate (x or y) up to tol.
template <typename Key>
std::vector<std::pair<Point, std::vector<std::size_t>>> group_triples(const ThreePlan& pi, Key key, double tol) {
  std::vector<std::pair<Point, std::vector<std::size_t>>> groups;
  for (std::size_t t = 0; t < pi.triples.size(); ++t) {
    const Point& p = key(pi.triples[t]);
    auto hit = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return (g.first - p).norm() <= tol; });
    if (hit != groups.end())
      hit->second.push_back(t);
    else
      groups.push_back({p, {t}});
  }
  return groups;
}

template <typename Key>
double marginal_residual(const ThreePlan& pi, const DiscreteMeasure& m, Key key, double tol) {
  const auto groups = group_triples(pi, key, tol);
  double r = 0.0;
  std::vector<bool> seen(m.size(), false);
  for (const auto& [p, members] : groups) {
    double mass = 0.0;
    for (auto t : members) mass += pi.triples[t].m;
    std::optional<std::size_t> atom;
    for (std::size_t a = 0; a < m.size(); ++a)
      if ((m[a].x - p).norm() <= tol) atom = a;
    if (!atom) {
      r = std::max(r, std::abs(mass));
      continue;
    }
    seen[*atom] = true;
    r = std::max(r, std::abs(mass - m[*atom].w));
  }
  for (std::size_t a = 0; a < m.size(); ++a)
    if (!seen[a]) r = std::max(r, m[a].w);
  return r;
}

template <typename Key>
double martingale_residual(const ThreePlan& pi, Key key, double tol) {
  double r = 0.0;
  for (const auto& [p, members] : group_triples(pi, key, tol)) {
    Point drift = Point::Zero(p.size());
    for (auto t : members) drift += pi.triples[t].m * (pi.triples[t].z - key(pi.triples[t]));
    r = std::max(r, drift.lpNorm<Eigen::Infinity>());
  }
  return r;
}

}  // namespace detail

/// Marginal and martingale residuals of pi against (mu, nu); valid iff all
/// residuals are at most 1e-8 and no mass is negative.
inline ValidationReport validate_three_plan(const ThreePlan& pi, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  constexpr double match_tol = 1e-9;
  auto by_x = [](const Triple& t) -> const Point& { return t.x; };
  auto by_y = [](const Triple& t) -> const Point& { return t.y; };
  ValidationReport r;
  r.mass_residual = std::abs(pi.total_mass() - 1.0);
  r.mu_marginal_residual = detail::marginal_residual(pi, mu, by_x, match_tol);
  r.nu_marginal_residual = detail::marginal_residual(pi, nu, by_y, match_tol);
  r.martingale_x_residual = detail::martingale_residual(pi, by_x, match_tol);
  r.martingale_y_residual = detail::martingale_residual(pi, by_y, match_tol);
  r.min_mass = pi.triples.empty() ? 0.0 : pi.triples.front().m;
  for (const auto& t : pi.triples) r.min_mass = std::min(r.min_mass, t.m);
  r.valid = !pi.triples.empty() && r.min_mass >= 0.0 && r.mass_residual <= kPlanTolerance &&
            r.mu_marginal_residual <= kPlanTolerance && r.nu_marginal_residual <= kPlanTolerance &&
            r.martingale_x_residual <= kPlanTolerance && r.martingale_y_residual <= kPlanTolerance;
  return r;
}

/// max_i,c |sum_j mass(i, j) (y_j - x_i)_c|
inline double martingale_row_residual(const Coupling& c) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < c.mass.rows(); ++i) {
    Point drift = Point::Zero(c.rows[i].size());
    for (Eigen::Index j = 0; j < c.mass.cols(); ++j) drift += c.mass(i, j) * (c.cols[j] - c.rows[i]);
    r = std::max(r, drift.lpNorm<Eigen::Infinity>());
  }
  return r;
}

/// Martingale coupling for nu = mu dilated by lambda >= 1 about the common
/// barycentre: each x moves to its image with probability 1/lambda and is
/// spread over nu otherwise. Empty when nu is not such a dilation.
inline std::optional<Coupling> dilation_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                                 double tol = 1e-9) {
  require_same_dim(mu, nu);
  if (mu.size() != nu.size()) return std::nullopt;
  const Point c = barycentre(mu);
  if ((c - barycentre(nu)).norm() > tol) return std::nullopt;
  const double sm = stats(mu).std_dev;
  const double sn = stats(nu).std_dev;
  if (sm <= tol) return std::nullopt;
  const double lambda = sn / sm;
  if (lambda < 1.0) return std::nullopt;

  Coupling out = detail::empty_coupling(mu, nu);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Point image = c + lambda * (mu[i].x - c);
    std::size_t hit = nu.size();
    for (std::size_t j = 0; j < nu.size() && hit == nu.size(); ++j)
      if ((nu[j].x - image).norm() <= tol * std::max(1.0, image.norm()) && std::abs(nu[j].w - mu[i].w) <= tol) hit = j;
    if (hit == nu.size()) return std::nullopt;
    for (std::size_t j = 0; j < nu.size(); ++j) out.mass(i, j) = mu[i].w * (lambda - 1.0) / lambda * nu[j].w;
    out.mass(i, hit) += mu[i].w / lambda;
  }
  if (out.marginal_residual(mu, nu) > tol || martingale_row_residual(out) > tol) return std::nullopt;
  return out;
}

/// Martingale coupling from mu to nu, if one exists: the explicit dilation
/// kernel when it applies, otherwise a feasible point of the martingale
/// transport LP.
inline std::optional<Coupling> find_martingale_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  if ((barycentre(mu) - barycentre(nu)).norm() > 1e-9) return std::nullopt;
  if (auto c = dilation_coupling(mu, nu)) return c;
  const int m = static_cast<int>(mu.size());
  const int n = static_cast<int>(nu.size());
  const int d = static_cast<int>(mu.dim());
  lp::Problem problem(m + n + m * d);
  for (int i = 0; i < m; ++i) problem.set_rhs(i, mu[i].w);
  for (int j = 0; j < n; ++j) problem.set_rhs(m + j, nu[j].w);
  std::vector<std::pair<int, double>> entries;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      entries.clear();
      entries.emplace_back(i, 1.0);
      entries.emplace_back(m + j, 1.0);
      const Point drift = nu[j].x - mu[i].x;
      for (int c = 0; c < d; ++c) entries.emplace_back(m + n + i * d + c, drift[c]);
      problem.add_column(0.0, entries);
    }
  const auto sol = lp::solve(problem);
  if (sol.status != lp::Status::optimal) return std::nullopt;

  Coupling c = detail::empty_coupling(mu, nu);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) c.mass(i, j) = sol.x[static_cast<std::size_t>(i) * n + j];
  if (c.marginal_residual(mu, nu) > 1e-9 || martingale_row_residual(c) > 1e-9) return std::nullopt;
  return c;
}

/// True iff nu dominates mu in convex order (a martingale coupling exists).
inline bool check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return find_martingale_coupling(mu, nu).has_value();
}

inline Coupling martingale_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  auto c = find_martingale_coupling(mu, nu);
  if (!c) throw NotInConvexOrder();
  return *std::move(c);
}

/// (var nu - var mu) / 2, valid when nu dominates mu in convex order.
inline double z2_convex_order_closed_form(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!check_convex_order(mu, nu)) throw NotInConvexOrder();
  return 0.5 * (stats(nu).variance - stats(mu).variance);
}

struct VarianceLpResult {
  double value = 0.0;  ///< min sum_k rho_k |z_k - [mu]|^2 over the candidate support
  std::vector<Point> support;
  std::vector<double> rho;
  Coupling pi_mu;  ///< martingale coupling mu -> rho
  Coupling pi_nu;  ///< martingale coupling nu -> rho
};

/// Minimum variance of a common convex-order majorant of mu and nu,
/// restricted to the candidate support. Throws Infeasible when no such
/// majorant lives on the support.
inline VarianceLpResult solve_variance_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                          const std::vector<Point>& support) {
  require_same_dim(mu, nu);
  if (support.empty()) throw Infeasible("empty candidate support");
  const Point c = barycentre(mu);
  if ((c - barycentre(nu)).norm() > 1e-9) throw BarycentreMismatch((c - barycentre(nu)).norm());

  const int m = static_cast<int>(mu.size());
  const int n = static_cast<int>(nu.size());
  const int d = static_cast<int>(mu.dim());
  const int K = static_cast<int>(support.size());
  // Rows: mu mass, nu mass, mu martingale, nu martingale, shared third marginal.
  const int r_mu = 0, r_nu = m, r_mart_mu = m + n, r_mart_nu = m + n + m * d, r_link = m + n + (m + n) * d;
  lp::Problem problem(r_link + K);
  for (int i = 0; i < m; ++i) problem.set_rhs(r_mu + i, mu[i].w);
  for (int j = 0; j < n; ++j) problem.set_rhs(r_nu + j, nu[j].w);

  std::vector<std::pair<int, double>> entries;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < K; ++k) {
      entries.clear();
      entries.emplace_back(r_mu + i, 1.0);
      const Point drift = support[k] - mu[i].x;
      for (int a = 0; a < d; ++a) entries.emplace_back(r_mart_mu + i * d + a, drift[a]);
      entries.emplace_back(r_link + k, 1.0);
      problem.add_column((support[k] - c).squaredNorm(), entries);
    }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < K; ++k) {
      entries.clear();
      entries.emplace_back(r_nu + j, 1.0);
      const Point drift = support[k] - nu[j].x;
      for (int a = 0; a < d; ++a) entries.emplace_back(r_mart_nu + j * d + a, drift[a]);
      entries.emplace_back(r_link + k, -1.0);
      problem.add_column(0.0, entries);
    }

  const auto sol = lp::solve(problem);
  if (sol.status == lp::Status::infeasible) throw Infeasible("candidate support admits no common majorant");
  if (sol.status != lp::Status::optimal)
    throw NotConverged("variance LP ended with status " + std::string(lp::to_string(sol.status)));

  VarianceLpResult out;
  out.support = support;
  out.pi_mu.rows.reserve(m);
  for (const auto& a : mu.atoms()) out.pi_mu.rows.push_back(a.x);
  for (const auto& a : nu.atoms()) out.pi_nu.rows.push_back(a.x);
  out.pi_mu.cols = support;
  out.pi_nu.cols = support;
  out.pi_mu.mass.resize(m, K);
  out.pi_nu.mass.resize(n, K);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < K; ++k) out.pi_mu.mass(i, k) = sol.x[static_cast<std::size_t>(i) * K + k];
  const std::size_t offset = static_cast<std::size_t>(m) * K;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < K; ++k) out.pi_nu.mass(j, k) = sol.x[offset + static_cast<std::size_t>(j) * K + k];
  out.rho.resize(K);
  for (int k = 0; k < K; ++k) out.rho[k] = out.pi_mu.mass.col(k).sum();
  out.value = sol.objective;
  return out;
}

/// Glues pi_mu and pi_nu through their common third marginal:
/// mass at (x, y, z_k) = pi_mu(x, k) pi_nu(y, k) / rho_k. Atoms with
/// rho_k below 1e-12 are dropped.
inline ThreePlan glue(const VarianceLpResult& r) {
  ThreePlan pi;
  for (std::size_t k = 0; k < r.support.size(); ++k) {
    const double rho = r.rho[k];
    if (rho < 1e-12) continue;
    for (Eigen::Index i = 0; i < r.pi_mu.mass.rows(); ++i) {
      const double a = r.pi_mu.mass(i, static_cast<Eigen::Index>(k));
      if (a <= 0.0) continue;
      for (Eigen::Index j = 0; j < r.pi_nu.mass.rows(); ++j) {
        const double b = r.pi_nu.mass(j, static_cast<Eigen::Index>(k));
        if (b <= 0.0) continue;
        pi.triples.push_back({r.pi_mu.rows[i], r.pi_nu.rows[j], r.support[k], a * b / rho});
      }
    }
  }
  return pi;
}

inline void append_unique(std::vector<Point>& pts, const Point& p, double tol = 1e-9) {
  for (const auto& q : pts)
    if ((q - p).norm() <= tol) return;
  pts.push_back(p);
}

/// Third coordinates z(p, q) = (p + q)/2 + (g(q) - g(p))/2 over active pairs
/// p in supp mu, q in supp nu, together with the working set itself.
inline std::vector<Point> build_candidate_support(const DualReport& dual, const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu) {
  const OneField& f = dual.field;
  auto in = [](const DiscreteMeasure& m, const Point& p) {
    return std::any_of(m.atoms().begin(), m.atoms().end(), [&](const Atom& a) { return (a.x - p).norm() <= 1e-9; });
  };
  std::vector<Point> out;
  for (const auto& [i, j] : dual.active_pairs) {
    if (!in(mu, f.points[i]) || !in(nu, f.points[j])) continue;
    append_unique(out, gap_maximizer(f.points[i], f.gradients[i], f.points[j], f.gradients[j]));
  }
  for (const auto& p : f.points) append_unique(out, p);
  return out;
}

struct CertifiedZ2 {
  double lower = 0.0;
  double upper = 0.0;
  double gap = 0.0;
  DualReport dual;
  ThreePlan primal;
  std::string route;  ///< "convex_order" or "dual_lp"

  double midpoint() const { return 0.5 * (lower + upper); }
};

class NotCertified : public Error {
 public:
  explicit NotCertified(CertifiedZ2 best)
      : Error("duality gap " + std::to_string(best.gap) + " above tolerance"), best_(std::move(best)) {}
  const CertifiedZ2& best() const noexcept { return best_; }

 private:
  CertifiedZ2 best_;
};

struct CertifyOptions {
  DualOptions dual;
  bool convex_order_shortcut = true;
};

namespace detail {

inline CertifiedZ2 bracket(DualReport dual, ThreePlan plan, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           std::string route) {
  CertifiedZ2 c;
  c.lower = dual.value - dual.max_violation;
  const auto v = validate_three_plan(plan, mu, nu);
  c.upper = v.valid ? three_plan_cost(plan) : std::numeric_limits<double>::infinity();
  c.gap = std::max(0.0, c.upper - c.lower);
  c.dual = std::move(dual);
  c.primal = std::move(plan);
  c.route = std::move(route);
  return c;
}

/// Pairs in convex order: the quadratic field u = |x|^2/2 (or its negative)
/// is optimal and a martingale coupling gives a zero-gap 3-plan.
inline std::optional<CertifiedZ2> certify_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                                       const CertifyOptions& opt) {
  const WorkingSet ws = working_set(mu, nu);
  const std::size_t base = nearest_point(ws.points, barycentre(mu));
  if (auto up = find_martingale_coupling(mu, nu)) {
    ThreePlan pi;
    for (Eigen::Index i = 0; i < up->mass.rows(); ++i)
      for (Eigen::Index j = 0; j < up->mass.cols(); ++j)
        if (up->mass(i, j) > 0.0) pi.triples.push_back({mu[i].x, nu[j].x, nu[j].x, up->mass(i, j)});
    auto dual = make_dual_report(quadratic_field(ws.points, 1.0, base), mu, nu, opt.dual.active_tol);
    dual.converged = true;
    return bracket(std::move(dual), std::move(pi), mu, nu, "convex_order");
  }
  if (auto down = find_martingale_coupling(nu, mu)) {
    ThreePlan pi;
    for (Eigen::Index j = 0; j < down->mass.rows(); ++j)
      for (Eigen::Index i = 0; i < down->mass.cols(); ++i)
        if (down->mass(j, i) > 0.0) pi.triples.push_back({mu[i].x, nu[j].x, mu[i].x, down->mass(j, i)});
    auto dual = make_dual_report(quadratic_field(ws.points, -1.0, base), mu, nu, opt.dual.active_tol);
    dual.converged = true;
    return bracket(std::move(dual), std::move(pi), mu, nu, "convex_order");
  }
  return std::nullopt;
}

inline std::vector<Point> all_midpoints(const std::vector<Point>& pts) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) append_unique(out, 0.5 * (pts[i] + pts[j]));
  return out;
}

}  // namespace detail

/// Certified bracket [lower, upper] for Z2(mu, nu): lower from a feasible
/// field, upper from a validated 3-plan. Throws NotCertified carrying the
/// best bracket when the gap stays above tol after one support enrichment.
inline CertifiedZ2 certify_z2(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = 1e-8,
                              const CertifyOptions& options = {}) {
  require_same_dim(mu, nu);
  const double mismatch = (barycentre(mu) - barycentre(nu)).norm();
  if (mismatch > 1e-9) throw BarycentreMismatch(mismatch);

  if (options.convex_order_shortcut) {
    if (auto c = detail::certify_convex_order(mu, nu, options)) {
      if (c->gap <= tol) return *std::move(c);
    }
  }

  DualReport dual = solve_dual_z2(mu, nu, tol, options.dual);
  std::vector<Point> support = build_candidate_support(dual, mu, nu);

  std::optional<CertifiedZ2> best;
  auto attempt = [&](const std::vector<Point>& candidates) {
    try {
      const auto lp = solve_variance_lp(mu, nu, candidates);
      auto c = detail::bracket(dual, glue(lp), mu, nu, "dual_lp");
      if (!best || c.gap < best->gap) best = std::move(c);
    } catch (const Infeasible&) {
    }
  };
  attempt(support);
  if (!best || best->gap > tol) {
    for (const auto& p : detail::all_midpoints(dual.field.points)) append_unique(support, p);
    attempt(support);
  }
  if (!best) {
    CertifiedZ2 empty;
    empty.lower = dual.value - dual.max_violation;
    empty.upper = std::numeric_limits<double>::infinity();
    empty.gap = std::numeric_limits<double>::infinity();
    empty.dual = std::move(dual);
    empty.route = "dual_lp";
    throw NotCertified(std::move(empty));
  }
  if (best->gap > tol) throw NotCertified(*std::move(best));
  return *std::move(best);
}

struct OptimalityReport {
  double max_z_residual = 0.0;          ///< max |z - z_u(x, y)| over mass-carrying triples
  double max_two_point_residual = 0.0;  ///< max |C(x, y)| over mass-carrying triples
  double min_constraint = 0.0;          ///< min C(x, y) over mass-carrying triples
  std::size_t worst_triple = 0;
  std::size_t checked = 0;
  bool z_ok = true;
  bool two_point_ok = true;
  bool ok = true;
};

/// Checks that each triple carrying more than mass_floor sits at the gap
/// maximizer of its pair and that the pair satisfies the two-point equality.
inline OptimalityReport verify_optimality_conditions(const DualReport& dual, const ThreePlan& pi, double tol,
                                                     double mass_floor = 1e-10) {
  OptimalityReport r;
  const OneField& f = dual.field;
  r.min_constraint = 0.0;
  for (std::size_t t = 0; t < pi.triples.size(); ++t) {
    const auto& tr = pi.triples[t];
    if (tr.m <= mass_floor) continue;
    const auto ix = f.find(tr.x);
    const auto iy = f.find(tr.y);
    if (!ix || !iy) throw InvalidMeasure("plan refers to a point outside the field");
    ++r.checked;
    const double zres = (tr.z - gap_maximizer(f.points[*ix], f.gradients[*ix], f.points[*iy], f.gradients[*iy])).norm();
    const double c = field_constraint(f, *ix, *iy);
    if (zres > r.max_z_residual) {
      r.max_z_residual = zres;
      r.worst_triple = t;
    }
    r.max_two_point_residual = std::max(r.max_two_point_residual, std::abs(c));
    r.min_constraint = std::min(r.min_constraint, c);
  }
  r.z_ok = r.max_z_residual <= tol;
  r.two_point_ok = r.min_constraint >= -tol;
  r.ok = r.z_ok && r.two_point_ok;
  return r;
}

}  // namespace zoloto
