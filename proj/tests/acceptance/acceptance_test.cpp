// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "zoloto/inequalities.hpp"
#include "zoloto/transport_plans.hpp"
#include "zoloto/wasserstein.hpp"
#include "zoloto/zolotarev.hpp"

using namespace zoloto;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct SuitePair {
  DiscreteMeasure mu, nu;
  double w2 = 0.0;
  std::optional<CertifiedZ2> certified;  // set when gap <= 1e-6
  std::optional<CertifiedZ2> best;       // NotCertified bracket otherwise
};

const std::vector<SuitePair>& suite() {
  static const std::vector<SuitePair> pairs = [] {
    std::vector<SuitePair> out;
    for (std::uint64_t s = 0; s < 200; ++s) {
      auto [mu, nu] = random_centred_pair(s);
      SuitePair p{mu, nu, solve_w2(mu, nu).w2, std::nullopt, std::nullopt};
      try {
        p.certified = certify_z2(mu, nu, 1e-6);
      } catch (const NotCertified& e) {
        p.best = e.best();
      }
      out.push_back(std::move(p));
    }
    return out;
  }();
  return pairs;
}

const CertifiedZ2& bracket_of(const SuitePair& p) { return p.certified ? *p.certified : *p.best; }

Outcome example_three() {
  const auto [mu, nu] = two_atom_pair(1.0, 2.0);
  const double w2sq = std::pow(solve_w2(mu, nu).w2, 2);
  const auto plan = two_atom_plan(1.0, 2.0);
  const auto v = validate_three_plan(plan, mu, nu);
  const double res = std::max({v.mass_residual, v.mu_marginal_residual, v.nu_marginal_residual,
                               v.martingale_x_residual, v.martingale_y_residual});
  const double cost = three_plan_cost(plan);
  const auto c = certify_z2(mu, nu, 1e-8);
  const bool ok = std::abs(w2sq - 2.0) <= 1e-10 && v.valid && res <= 1e-12 && std::abs(cost - 2.0 / 3.0) <= 1e-12 &&
                  c.lower >= 0.5 && c.upper <= 2.0 / 3.0 + 1e-8;
  return {ok, fmt("w2^2=%.15g plan_residual=%.3g cost=%.15g z2=[%.15g, %.15g]", w2sq, res, cost, c.lower, c.upper)};
}

Outcome sharpness() {
  bool ok = true;
  double width = INFINITY;
  std::string d;
  for (double b : {1.1, 1.01, 1.001}) {
    const auto [mu, nu] = two_atom_pair(1.0, b);
    const double w2sq = std::pow(solve_w2(mu, nu).w2, 2);
    const auto c = certify_z2(mu, nu, 1e-8);
    const double lo = c.lower / w2sq, hi = c.upper / w2sq, cap = b / (2 * (1 + b));
    ok = ok && lo >= 0.25 - 1e-7 && hi <= cap + 1e-7;
    if (b == 1.001) width = cap - 0.25;
    d += fmt("b=%g ratio=[%.10f, %.10f] cap=%.10f; ", b, lo, hi, cap);
  }
  return {ok && width <= 2.6e-4, d + fmt("bracket width at b=1.001: %.3g", width)};
}

Outcome lower_bound_suite() {
  int violations = 0, strict_fail = 0, strict_checked = 0;
  double worst = INFINITY;
  for (const auto& p : suite()) {
    const auto& c = bracket_of(p);
    const double slack = c.lower - 0.25 * p.w2 * p.w2;
    worst = std::min(worst, slack);
    if (slack < -1e-8) ++violations;
    if (!measures_equal(p.mu, p.nu, 1e-7)) {
      ++strict_checked;
      if (!(slack > 0.0)) ++strict_fail;
    }
  }
  return {violations == 0 && strict_fail == 0,
          fmt("min slack %.3g, violations %d, strict %d/%d", worst, violations, strict_checked - strict_fail,
              strict_checked)};
}

Outcome upper_bound_suite() {
  int violations = 0;
  double worst_sigma = INFINITY, worst_var = INFINITY;
  for (const auto& p : suite()) {
    const auto& c = bracket_of(p);
    const auto sm = stats(p.mu), sn = stats(p.nu);
    const double rs = 0.5 * (sm.std_dev + sn.std_dev) * p.w2 - c.upper;
    const double rv = std::sqrt(0.5 * (sm.variance + sn.variance)) * p.w2 - c.upper;
    worst_sigma = std::min(worst_sigma, rs);
    worst_var = std::min(worst_var, rv);
    if (rs < -1e-8 || rv < -1e-8) ++violations;
  }
  return {violations == 0, fmt("min slack sigma %.3g, var %.3g, violations %d", worst_sigma, worst_var, violations)};
}

Outcome dilation_equality() {
  bool ok = true;
  std::string d;
  for (double l : {1.5, 2.0, 3.0}) {
    const auto [mu, nu] = dilation_pair(l);
    const double w2 = solve_w2(mu, nu).w2;
    const double z2 = certify_z2(mu, nu, 1e-8).midpoint();
    const double bound = 0.5 * (stats(mu).std_dev + stats(nu).std_dev) * w2;
    ok = ok && std::abs(z2 - bound) <= 1e-6 && std::abs(z2 - 0.5 * (l * l - 1)) <= 1e-8 && std::abs(w2 - (l - 1)) <= 1e-8;
    d += fmt("lambda=%g z2=%.12g w2=%.12g; ", l, z2, w2);
  }
  return {ok, d};
}

Outcome convex_order_pairs() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    GeneratorSpec g;
    g.centre = true;
    const auto mu = random_measure(1 + s % 3, 1 + s % 5, 5000 + s, g);
    const auto nu = oracle::spread(mu, rng, 0.2 + 0.02 * static_cast<double>(s % 10));
    const double expected = 0.5 * (oracle::variance(nu) - oracle::variance(mu));
    worst = std::max(worst, std::abs(certify_z2(mu, nu, 1e-8).midpoint() - expected));
  }
  return {worst <= 1e-7, fmt("max |z2 - (var nu - var mu)/2| = %.3g over 50 pairs", worst)};
}

Outcome duality_gap() {
  int certified = 0, honest = 0;
  double worst_gap = 0.0, worst_width = 0.0;
  for (const auto& p : suite()) {
    if (p.certified) {
      ++certified;
      worst_gap = std::max(worst_gap, p.certified->gap);
    } else {
      worst_width = std::max(worst_width, p.best->gap);
      if (p.best->gap <= 1e-4) ++honest;
    }
  }
  const int rest = 200 - certified;
  return {certified >= 190 && honest == rest,
          fmt("certified %d/200 (max gap %.3g), uncertified %d with width <= 1e-4: %d (max %.3g)", certified, worst_gap,
              rest, honest, worst_width)};
}

Outcome magic_formula() {
  double worst = 0.0;
  int n = 0;
  for (const auto& p : suite()) {
    if (!p.certified) continue;
    ++n;
    worst = std::max(worst, std::abs(p.certified->dual.value - magic_formula_value(p.certified->dual.field, p.mu, p.nu)));
  }
  return {worst <= 1e-6, fmt("max |value - magic| = %.3g over %d certified pairs", worst, n)};
}

Outcome optimality() {
  double worst_z = 0.0, worst_c = 0.0;
  int failures = 0;
  for (const auto& p : suite()) {
    if (!p.certified) continue;
    const auto r = verify_optimality_conditions(p.certified->dual, p.certified->primal, 1e-5);
    worst_z = std::max(worst_z, r.max_z_residual);
    worst_c = std::max(worst_c, r.max_two_point_residual);
    if (r.max_z_residual > 1e-5 || r.max_two_point_residual > 1e-5) ++failures;
  }
  return {failures == 0, fmt("max |z - z_u| = %.3g, max |C| = %.3g, failures %d", worst_z, worst_c, failures)};
}

Outcome no_reverse() {
  bool ok = true;
  std::string d;
  for (int n : {1, 5, 10, 50, 100}) {
    const auto [mu, nu] = noreverse_pair(n);
    const double w2 = solve_w2(mu, nu).w2;
    const double z2 = certify_z2(mu, nu, 1e-8).midpoint();
    const double q = 1.0 + 1.0 / n;
    const double closed = 0.5 * (q * q - 1.0) * n * n;
    const double ratio = z2 / (w2 * w2);
    ok = ok && std::abs(closed - (2.0 * n + 1) / 2) <= 1e-6 && std::abs(ratio - (2.0 * n + 1) / 2) <= 1e-6;
    if (n <= 10) ok = ok && std::abs(z2 - 0.5 * (q * q - 1.0)) <= 1e-7;
    d += fmt("n=%d ratio=%.10g; ", n, ratio);
  }
  return {ok, d};
}

Outcome gaussian() {
  bool ok = true;
  double pw = INFINITY, pz = INFINITY;
  std::string d;
  for (std::size_t n : {20u, 50u, 200u}) {
    const auto mu = gaussian_quantile_discretize(1.0, n), nu = gaussian_quantile_discretize(2.0, n);
    const double ew = std::abs(solve_w2(mu, nu).w2 - 1.0);
    const double ez = std::abs(certify_z2(mu, nu, 1e-8).midpoint() - 1.5);
    ok = ok && ew < pw && ez < pz;
    pw = ew;
    pz = ez;
    d += fmt("n=%zu |w2-1|=%.4g |z2-1.5|=%.4g; ", n, ew, ez);
  }
  return {ok && pw <= 0.02 && pz <= 0.05, d};
}

Outcome weak_duality() {
  std::mt19937_64 rng(12345);
  int violations = 0;
  double worst = -INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + t % 3;
    const auto s = oracle::random_plan(rng, d, 1 + t % 4, 1 + (t / 3) % 4, 1 + (t / 2) % 5);
    const auto f = oracle::random_smooth_field(rng, working_set(s.mu, s.nu).points);
    const bool feasible = check_field_admissible(f, 0.0).ok && validate_three_plan(s.plan, s.mu, s.nu).valid;
    const double excess = field_objective(f, s.mu, s.nu) - three_plan_cost(s.plan);
    worst = std::max(worst, excess);
    if (!feasible || excess > 1e-10) ++violations;
  }
  return {violations == 0, fmt("max (objective - cost) = %.3g, violations %d / 1000", worst, violations)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"two-atom example reproduction", example_three},
      {"sharpness of the lower constant", sharpness},
      {"lower bound on 200 random pairs", lower_bound_suite},
      {"upper bounds on 200 random pairs", upper_bound_suite},
      {"dilation equality", dilation_equality},
      {"convex-order closed form", convex_order_pairs},
      {"duality-gap certification", duality_gap},
      {"magic formula", magic_formula},
      {"optimality conditions", optimality},
      {"no reverse inequality", no_reverse},
      {"discretized Gaussian example", gaussian},
      {"weak duality", weak_duality},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %2zu (%s): %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
