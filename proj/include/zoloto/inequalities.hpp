#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "zoloto/measure.hpp"
#include "zoloto/transport_plans.hpp"
#include "zoloto/wasserstein.hpp"

namespace zoloto {

/// Default absolute slack tolerance for equality flags, scaled by max(1, w2^2).
inline constexpr double kEqualityTolerance = 1e-6;

struct BoundReport {
  double w2 = 0.0;
  double z2 = 0.0;  ///< midpoint of the certified bracket
  double z2_lower = 0.0;
  double z2_upper = 0.0;
  double gap = 0.0;
  bool certified = false;
  bool barycentre_mismatch = false;

  double sigma_mu = 0.0;
  double sigma_nu = 0.0;
  double var_mu = 0.0;
  double var_nu = 0.0;

  double lower_bound_lhs = 0.0;        ///< w2^2 / 4
  double upper_bound_rhs_sigma = 0.0;  ///< (sigma_mu + sigma_nu) w2 / 2
  double upper_bound_rhs_var = 0.0;    ///< sqrt((var_mu + var_nu) / 2) w2

  double slack_lower = 0.0;        ///< z2 - w2^2/4
  double slack_upper_sigma = 0.0;  ///< (sigma_mu + sigma_nu) w2 / 2 - z2
  double slack_upper_var = 0.0;    ///< sqrt((var_mu + var_nu) / 2) w2 - z2

  bool eq_lower = false;
  bool eq_upper_sigma = false;
  bool eq_upper_var = false;
  std::string note;
};

/// Exact W2, certified Z2 and the three bounds relating them. A barycentre
/// mismatch is reported with z2 = +inf instead of thrown; the lower bound
/// then holds trivially and the upper bounds do not apply.
inline BoundReport check_bounds(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                double tol = kEqualityTolerance, double certify_tol = 1e-8) {
  require_same_dim(mu, nu);
  BoundReport r;
  const auto sm = stats(mu);
  const auto sn = stats(nu);
  r.sigma_mu = sm.std_dev;
  r.sigma_nu = sn.std_dev;
  r.var_mu = sm.variance;
  r.var_nu = sn.variance;
  r.w2 = solve_w2(mu, nu).w2;
  const double w2sq = r.w2 * r.w2;
  r.lower_bound_lhs = 0.25 * w2sq;
  r.upper_bound_rhs_sigma = 0.5 * (r.sigma_mu + r.sigma_nu) * r.w2;
  r.upper_bound_rhs_var = std::sqrt(0.5 * (r.var_mu + r.var_nu)) * r.w2;

  constexpr double inf = std::numeric_limits<double>::infinity();
  try {
    const auto c = certify_z2(mu, nu, certify_tol);
    r.z2_lower = c.lower;
    r.z2_upper = c.upper;
    r.gap = c.gap;
    r.certified = true;
  } catch (const BarycentreMismatch& e) {
    r.barycentre_mismatch = true;
    r.z2 = r.z2_lower = r.z2_upper = inf;
    r.gap = 0.0;
    r.slack_lower = inf;
    r.slack_upper_sigma = r.slack_upper_var = -inf;
    r.note = "barycentre mismatch (" + std::to_string(e.distance()) + "): z2 is infinite";
    return r;
  } catch (const NotCertified& e) {
    r.z2_lower = e.best().lower;
    r.z2_upper = e.best().upper;
    r.gap = e.best().gap;
    r.note = "bracket not certified at the requested tolerance";
  }
  r.z2 = std::isfinite(r.z2_upper) ? 0.5 * (r.z2_lower + r.z2_upper) : r.z2_lower;
  r.slack_lower = r.z2 - r.lower_bound_lhs;
  r.slack_upper_sigma = r.upper_bound_rhs_sigma - r.z2;
  r.slack_upper_var = r.upper_bound_rhs_var - r.z2;

  const double flag_tol = tol * std::max(1.0, w2sq);
  r.eq_lower = std::abs(r.slack_lower) <= flag_tol;
  r.eq_upper_sigma = std::abs(r.slack_upper_sigma) <= flag_tol;
  r.eq_upper_var = std::abs(r.slack_upper_var) <= flag_tol;
  return r;
}

/// Equality case of the lower bound: the measures coincide.
inline bool classify_lower_equality(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  return measures_equal(mu, nu, tol);
}

/// False when the report flags lower-bound equality although the measures
/// differ even at ten times the tolerance.
inline bool lower_flag_consistent(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const BoundReport& report,
                                  double tol) {
  return !report.eq_lower || measures_equal(mu, nu, 10.0 * tol);
}

struct UpperEquality {
  bool is_dilation = false;
  std::optional<double> lambda;
};

/// Equality case of the sigma upper bound: nu is a dilation of mu about the
/// common barycentre.
inline UpperEquality classify_upper_equality(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  require_same_dim(mu, nu);
  const auto cm = center(mu);
  const auto cn = center(nu);
  const double sm = stats(cm).std_dev;
  const double sn = stats(cn).std_dev;
  if (sm <= tol || sn <= tol) {
    // Point masses: only the pair of two point masses counts.
    return {sm <= tol && sn <= tol, std::nullopt};
  }
  const double lambda = sn / sm;
  if (!measures_equal(dilate(cm, lambda), cn, tol)) return {false, std::nullopt};
  return {true, lambda};
}

// Ratio scans ----------------------------------------------------------------

enum class Family { two_atom, gaussian_1d, dilation, random, noreverse };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::two_atom: return "two_atom";
    case Family::gaussian_1d: return "gaussian_1d";
    case Family::dilation: return "dilation";
    case Family::random: return "random";
    case Family::noreverse: return "noreverse";
  }
  return "unknown";
}

inline std::optional<Family> parse_family(std::string_view s) {
  for (Family f : {Family::two_atom, Family::gaussian_1d, Family::dilation, Family::random, Family::noreverse})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

struct FamilySpec {
  Family family = Family::two_atom;
  // two_atom: a fixed, b swept over [from, to].
  // dilation: lambda swept over [from, to], base measure (d_-1 + d_1)/2.
  // gaussian_1d: sigma1 = a, sigma2 = b, atom counts in n_atoms.
  // noreverse: n = 1 .. steps.
  // random: `steps` pairs with `atoms` atoms per side in dimension `dim`.
  double a = 1.0;
  double b = 2.0;
  double from = 1.001;
  double to = 2.0;
  int steps = 50;
  std::vector<int> n_atoms{20, 50, 200};
  int dim = 2;
  int atoms = 5;
};

struct ScanRow {
  std::string family;
  double param1 = 0.0;
  double param2 = 0.0;
  double w2 = 0.0;
  double z2_lower = 0.0;
  double z2_upper = 0.0;
  double gap = 0.0;
  double ratio_sq = 0.0;
  double ratio_lin = 0.0;
  double sigma_mu = 0.0;
  double sigma_nu = 0.0;
  double bound_sigma = 0.0;
  double bound_var = 0.0;
  bool eq_lower = false;
  bool eq_upper = false;
};

/// mu_{a,b} = b/(a+b) d_{-a} + a/(a+b) d_b and its mirror image.
inline std::pair<DiscreteMeasure, DiscreteMeasure> two_atom_pair(double a, double b) {
  if (!(a > 0.0) || !(b > a)) throw InvalidMeasure("two-atom pair needs 0 < a < b");
  const std::vector<double> xm{-a, b}, xn{-b, a};
  const std::vector<double> wm{b / (a + b), a / (a + b)}, wn{a / (a + b), b / (a + b)};
  return {DiscreteMeasure::on_line(xm, wm), DiscreteMeasure::on_line(xn, wn)};
}

/// Admissible 3-plan for two_atom_pair(a, b) with monotone (x, y) marginal
/// and cost ab(b - a)/(a + b).
inline ThreePlan two_atom_plan(double a, double b) {
  auto p = [](double v) { return Point::Constant(1, v); };
  const double s = a + b;
  return {{{p(-a), p(-b), p(-b), a / s}, {p(-a), p(a), p(0.0), (b - a) / s}, {p(b), p(a), p(b), a / s}}};
}

/// (d_-1 + d_1)/2 and its dilation by lambda.
inline std::pair<DiscreteMeasure, DiscreteMeasure> dilation_pair(double lambda) {
  const std::vector<double> x{-1.0, 1.0}, xl{-lambda, lambda}, w{0.5, 0.5};
  return {DiscreteMeasure::on_line(x, w), DiscreteMeasure::on_line(xl, w)};
}

/// (d_-1 + d_1)/2 against (d_{-1-1/n} + d_{1+1/n})/2.
inline std::pair<DiscreteMeasure, DiscreteMeasure> noreverse_pair(int n) {
  if (n < 1) throw InvalidMeasure("noreverse family needs n >= 1");
  return dilation_pair(1.0 + 1.0 / n);
}

/// Centred random pair used by the property suites: dimension 1 + seed % 3,
/// 1..max_atoms atoms per side.
inline std::pair<DiscreteMeasure, DiscreteMeasure> random_centred_pair(std::uint64_t seed, std::size_t max_atoms = 8) {
  std::mt19937_64 rng(seed);
  const std::size_t d = 1 + seed % 3;
  const std::size_t nm = 1 + rng() % max_atoms;
  const std::size_t nn = 1 + rng() % max_atoms;
  GeneratorSpec g;
  g.centre = true;
  return {random_measure(d, nm, 2 * seed, g), random_measure(d, nn, 2 * seed + 1, g)};
}

namespace detail {

inline ScanRow scan_row(Family family, double p1, double p2, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto br = check_bounds(mu, nu);
  ScanRow row;
  row.family = std::string(to_string(family));
  row.param1 = p1;
  row.param2 = p2;
  row.w2 = br.w2;
  row.z2_lower = br.z2_lower;
  row.z2_upper = br.z2_upper;
  row.gap = br.gap;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  row.ratio_sq = br.w2 > 0.0 ? br.z2 / (br.w2 * br.w2) : nan;
  row.ratio_lin = br.w2 > 0.0 ? br.z2 / br.w2 : nan;
  row.sigma_mu = br.sigma_mu;
  row.sigma_nu = br.sigma_nu;
  row.bound_sigma = 0.5 * (br.sigma_mu + br.sigma_nu);
  row.bound_var = std::sqrt(0.5 * (br.var_mu + br.var_nu));
  row.eq_lower = br.eq_lower;
  row.eq_upper = br.eq_upper_sigma;
  return row;
}

inline double grid(double from, double to, int k, int steps) {
  return steps <= 1 ? from : from + (to - from) * static_cast<double>(k) / static_cast<double>(steps - 1);
}

/// Runs body(i) for i in [0, n) on up to `threads` workers.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// One row per member of the family, in parameter order regardless of the
/// number of worker threads.
inline std::vector<ScanRow> scan_ratio(const FamilySpec& spec, std::uint64_t seed, int threads = 1) {
  struct Job {
    double p1, p2;
    std::pair<DiscreteMeasure, DiscreteMeasure> pair;
  };
  std::vector<Job> jobs;
  switch (spec.family) {
    case Family::two_atom:
      for (int k = 0; k < spec.steps; ++k) {
        const double b = detail::grid(spec.from, spec.to, k, spec.steps);
        jobs.push_back({spec.a, b, two_atom_pair(spec.a, b)});
      }
      break;
    case Family::dilation:
      for (int k = 0; k < spec.steps; ++k) {
        const double l = detail::grid(spec.from, spec.to, k, spec.steps);
        jobs.push_back({l, 0.0, dilation_pair(l)});
      }
      break;
    case Family::noreverse:
      for (int n = 1; n <= spec.steps; ++n) jobs.push_back({static_cast<double>(n), 0.0, noreverse_pair(n)});
      break;
    case Family::gaussian_1d:
      for (int n : spec.n_atoms) {
        if (n < 1) throw InvalidMeasure("atom count must be positive");
        jobs.push_back({static_cast<double>(n), spec.b / spec.a,
                        {gaussian_quantile_discretize(spec.a, n), gaussian_quantile_discretize(spec.b, n)}});
      }
      break;
    case Family::random: {
      if (spec.dim < 1 || spec.atoms < 1) throw InvalidMeasure("dim and atoms must be positive");
      GeneratorSpec g;
      g.centre = true;
      for (int k = 0; k < spec.steps; ++k) {
        const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(k);
        jobs.push_back({static_cast<double>(spec.dim), static_cast<double>(spec.atoms),
                        {random_measure(spec.dim, spec.atoms, 2 * s, g), random_measure(spec.dim, spec.atoms, 2 * s + 1, g)}});
      }
      break;
    }
  }
  std::vector<ScanRow> rows(jobs.size());
  detail::parallel_for(jobs.size(), threads, [&](std::size_t i) {
    rows[i] = detail::scan_row(spec.family, jobs[i].p1, jobs[i].p2, jobs[i].pair.first, jobs[i].pair.second);
  });
  return rows;
}

struct HEstimate {
  double estimate = 0.0;  ///< largest certified lower bracket of z2 / w2 seen
  double cap = 0.0;       ///< proven bound (a + b) / 2
  std::size_t evaluated = 0;
};

/// Empirical lower estimate of h(a, b) = sup z2/w2 over distinct centred
/// pairs with sigma_mu <= a and sigma_nu <= b. The first candidate is a
/// symmetric two-atom dilation pair at the sigma caps; the rest are random
/// pairs rescaled below the caps.
inline HEstimate estimate_h(double a, double b, int budget, std::uint64_t seed) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw InvalidMeasure("sigma caps must be nonnegative");
  HEstimate h;
  h.cap = 0.5 * (a + b);
  if (a == 0.0 && b == 0.0) return h;

  auto consider = [&](const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const double w2 = solve_w2(mu, nu).w2;
    if (w2 <= 1e-9) return;
    double lower;
    try {
      lower = certify_z2(mu, nu, 1e-8).lower;
    } catch (const NotCertified& e) {
      lower = e.best().lower;
    }
    ++h.evaluated;
    h.estimate = std::max(h.estimate, lower / w2);
  };
  auto symmetric = [](double s) {
    if (s == 0.0) return DiscreteMeasure::dirac(Point::Zero(1));
    const std::vector<double> x{-s, s}, w{0.5, 0.5};
    return DiscreteMeasure::on_line(x, w);
  };

  if (budget <= 0) return h;
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double inner = lo == hi ? lo / 1.001 : lo;
  auto lo_m = symmetric(inner), hi_m = symmetric(hi);
  if (a <= b)
    consider(lo_m, hi_m);
  else
    consider(hi_m, lo_m);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GeneratorSpec g;
  g.centre = true;
  auto scaled = [&](std::size_t d, std::size_t n, std::uint64_t s, double cap) {
    const auto m = random_measure(d, n, s, g);
    const double sd = stats(m).std_dev;
    if (cap == 0.0 || sd == 0.0) return DiscreteMeasure::dirac(Point::Zero(static_cast<Eigen::Index>(d)));
    return dilate(m, cap * (1.0 - 0.5 * unit(rng)) / sd);
  };
  for (int k = 1; k < budget; ++k) {
    const std::size_t d = 1 + rng() % 2;
    const std::size_t nm = 1 + rng() % 5, nn = 1 + rng() % 5;
    const std::uint64_t s = rng();
    const auto mu = scaled(d, nm, s, a);
    const auto nu = scaled(d, nn, s + 1, b);
    consider(mu, nu);
  }
  return h;
}

}  // namespace zoloto
