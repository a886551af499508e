#pragma once

// Command-line front end. `run` is the whole program minus process exit so
// tests can drive it with string streams.

#include <cmath>
#include <charconv>
#include <cstdlib>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "zoloto/inequalities.hpp"
#include "zoloto/io.hpp"
#include "zoloto/transport_plans.hpp"
#include "zoloto/wasserstein.hpp"

namespace zoloto::cli {

enum ExitCode : int { success = 0, failure = 1, input_error = 2, dimension_error = 3, not_certified = 4 };

using json = nlohmann::ordered_json;

struct RunConfig {
  std::string mu_path, nu_path;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string format = "json";
  std::string plan_path;
  int threads = 1;

  // example / scan parameters
  std::string example;
  std::string family;
  double a = 1.0, b = 2.0;
  double b_from = 1.001, b_to = 2.0;
  double lambda = 2.0, lambda_from = 1.1, lambda_to = 3.0;
  double sigma1 = 1.0, sigma2 = 2.0;
  int n = 0;
  int steps = 0;
  std::vector<int> n_list{20, 50, 200};
  int dim = 2, atoms = 5;
};

class InputError : public Error {
 public:
  using Error::Error;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Non-finite numbers become the strings "inf", "-inf", "nan".
inline json number(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

/// Flat objects become a header line and one value line.
inline void emit(std::ostream& out, const json& j, const std::string& format) {
  if (format == "csv" && j.is_object()) {
    std::string head, row;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_structured()) continue;
      if (!head.empty()) {
        head += ',';
        row += ',';
      }
      head += it.key();
      row += it->is_number_float() ? format_number(it->get<double>()) : (it->is_string() ? it->get<std::string>() : it->dump());
    }
    out << head << '\n' << row << '\n';
    return;
  }
  if (format == "csv" && j.is_array() && !j.empty() && j.front().is_object()) {
    std::string head;
    for (auto it = j.front().begin(); it != j.front().end(); ++it) head += (head.empty() ? "" : ",") + it.key();
    out << head << '\n';
    for (const auto& r : j) {
      std::string row;
      for (auto it = r.begin(); it != r.end(); ++it) {
        if (!row.empty()) row += ',';
        row += it->is_number_float() ? format_number(it->get<double>()) : (it->is_string() ? it->get<std::string>() : it->dump());
      }
      out << row << '\n';
    }
    return;
  }
  out << j.dump(2) << '\n';
}

inline std::pair<DiscreteMeasure, DiscreteMeasure> load_pair(const RunConfig& c) {
  if (c.mu_path.empty() || c.nu_path.empty()) throw InputError("--mu and --nu are required");
  auto mu = io::read_measure(c.mu_path);
  auto nu = io::read_measure(c.nu_path);
  require_same_dim(mu, nu);
  return {std::move(mu), std::move(nu)};
}

inline json bracket_json(const CertifiedZ2& c, bool certified) {
  return {{"z2_lower", number(c.lower)}, {"z2_upper", number(c.upper)}, {"gap", number(c.gap)},
          {"z2", number(std::isfinite(c.upper) ? c.midpoint() : c.lower)}, {"certified", certified},
          {"route", c.route}};
}

inline const json kInfiniteZ2 = {{"z2", "inf"}, {"reason", "barycentre mismatch"}};

inline int cmd_w2(const RunConfig& c, std::ostream& out) {
  const auto [mu, nu] = load_pair(c);
  const auto r = solve_w2(mu, nu);
  if (!c.plan_path.empty()) io::write_json_file(c.plan_path, io::to_json(r.plan));
  emit(out, {{"w2", r.w2}}, c.format);
  return success;
}

inline int cmd_z2(const RunConfig& c, std::ostream& out, bool full) {
  const auto [mu, nu] = load_pair(c);
  CertifiedZ2 result;
  bool certified = true;
  try {
    result = certify_z2(mu, nu, c.tol);
  } catch (const BarycentreMismatch&) {
    emit(out, kInfiniteZ2, c.format);
    return success;
  } catch (const NotCertified& e) {
    result = e.best();
    certified = false;
    spdlog::warn("gap {} above tolerance {}", e.best().gap, c.tol);
  }
  if (!c.plan_path.empty()) io::write_json_file(c.plan_path, io::to_json(result.primal));
  json j = bracket_json(result, certified);
  if (full) {
    const auto opt = verify_optimality_conditions(result.dual, result.primal, 1e-5);
    j["magic_formula"] = number(magic_formula_value(result.dual.field, mu, nu));
    j["optimality"] = {{"max_z_residual", opt.max_z_residual},
                       {"max_two_point_residual", opt.max_two_point_residual},
                       {"ok", opt.ok}};
    j["dual"] = io::to_json(result.dual);
    j["plan"] = io::to_json(result.primal);
    if (!c.out_path.empty()) {
      io::write_json_file(c.out_path, j);
      emit(out, bracket_json(result, certified), c.format);
    } else {
      emit(out, j, c.format);
    }
  } else {
    emit(out, j, c.format);
  }
  return certified ? success : not_certified;
}

inline int cmd_bounds(const RunConfig& c, std::ostream& out) {
  const auto [mu, nu] = load_pair(c);
  const auto r = check_bounds(mu, nu, kEqualityTolerance, c.tol);
  json j = {{"w2", r.w2},
            {"z2", number(r.z2)},
            {"z2_lower", number(r.z2_lower)},
            {"z2_upper", number(r.z2_upper)},
            {"gap", number(r.gap)},
            {"certified", r.certified},
            {"sigma_mu", r.sigma_mu},
            {"sigma_nu", r.sigma_nu},
            {"lower_bound_lhs", r.lower_bound_lhs},
            {"upper_bound_rhs_sigma", r.upper_bound_rhs_sigma},
            {"upper_bound_rhs_var", r.upper_bound_rhs_var},
            {"slack_lower", number(r.slack_lower)},
            {"slack_upper_sigma", number(r.slack_upper_sigma)},
            {"slack_upper_var", number(r.slack_upper_var)},
            {"eq_lower", r.eq_lower},
            {"eq_upper_sigma", r.eq_upper_sigma},
            {"eq_upper_var", r.eq_upper_var}};
  if (!r.note.empty()) j["note"] = r.note;
  if (!r.barycentre_mismatch) {
    const auto up = classify_upper_equality(mu, nu, 1e-9);
    j["is_dilation"] = up.is_dilation;
    j["lambda"] = up.lambda ? json(*up.lambda) : json(nullptr);
  }
  emit(out, j, c.format);
  return r.certified || r.barycentre_mismatch ? success : not_certified;
}

// Reproduction tables --------------------------------------------------------

struct CheckRow {
  std::string quantity;
  std::string formula;
  double computed;
  double reference;
  double tol;
  enum Kind { equal, at_most, at_least } kind = equal;

  double diff() const {
    switch (kind) {
      case at_most: return std::max(0.0, computed - reference);
      case at_least: return std::max(0.0, reference - computed);
      default: return std::abs(computed - reference);
    }
  }
  bool ok() const { return diff() <= tol; }
};

inline CertifiedZ2 certify_or_best(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol) {
  try {
    return certify_z2(mu, nu, tol);
  } catch (const NotCertified& e) {
    return e.best();
  }
}

inline std::vector<CheckRow> example_rows(const RunConfig& c) {
  std::vector<CheckRow> rows;
  if (c.example == "opt14") {
    const double a = c.a, b = c.b;
    if (!(a > 0.0) || !(b > a)) throw InputError("opt14 needs 0 < a < b");
    const auto [mu, nu] = two_atom_pair(a, b);
    const double w2sq = std::pow(solve_w2(mu, nu).w2, 2);
    const auto plan = two_atom_plan(a, b);
    const auto v = validate_three_plan(plan, mu, nu);
    const double residual = std::max({v.mu_marginal_residual, v.nu_marginal_residual, v.martingale_x_residual,
                                      v.martingale_y_residual, v.mass_residual});
    const double cost_formula = a * b * (b - a) / (a + b);
    const auto z = certify_or_best(mu, nu, c.tol);
    rows.push_back({"w2_sq", "2a(b-a)", w2sq, 2 * a * (b - a), 1e-10});
    rows.push_back({"plan_residual", "0", residual, 0.0, 1e-12});
    rows.push_back({"plan_cost", "ab(b-a)/(a+b)", three_plan_cost(plan), cost_formula, 1e-12});
    rows.push_back({"z2_upper", "<= ab(b-a)/(a+b)", z.upper, cost_formula, 1e-8, CheckRow::at_most});
    rows.push_back({"z2_lower", ">= w2_sq/4", z.lower, 0.25 * w2sq, 1e-8, CheckRow::at_least});
    rows.push_back({"ratio_upper", "<= b/(2(a+b))", z.upper / w2sq, b / (2 * (a + b)), 1e-7, CheckRow::at_most});
    rows.push_back({"ratio_lower", ">= 1/4", z.lower / w2sq, 0.25, 1e-7, CheckRow::at_least});
  } else if (c.example == "gauss") {
    const int n = c.n > 0 ? c.n : 200;
    if (!(c.sigma1 > 0.0) || !(c.sigma2 >= c.sigma1)) throw InputError("gauss needs 0 < sigma1 <= sigma2");
    const auto mu = gaussian_quantile_discretize(c.sigma1, static_cast<std::size_t>(n));
    const auto nu = gaussian_quantile_discretize(c.sigma2, static_cast<std::size_t>(n));
    const auto z = certify_or_best(mu, nu, c.tol);
    rows.push_back({"w2", "sigma2 - sigma1", solve_w2(mu, nu).w2, c.sigma2 - c.sigma1, 0.02});
    rows.push_back({"z2", "(sigma2^2 - sigma1^2)/2", z.midpoint(), 0.5 * (c.sigma2 * c.sigma2 - c.sigma1 * c.sigma1),
                    0.05});
  } else if (c.example == "noreverse") {
    const int n = c.n > 0 ? c.n : 10;
    const auto [mu, nu] = noreverse_pair(n);
    const double w2 = solve_w2(mu, nu).w2;
    const auto z = certify_or_best(mu, nu, c.tol);
    const double q = 1.0 + 1.0 / n;
    rows.push_back({"w2_sq", "1/n^2", w2 * w2, 1.0 / (double(n) * n), 1e-10});
    rows.push_back({"z2", "((1+1/n)^2 - 1)/2", z.midpoint(), 0.5 * (q * q - 1.0), 1e-7});
    rows.push_back({"ratio_sq", "(2n+1)/2", z.midpoint() / (w2 * w2), (2.0 * n + 1.0) / 2.0, 1e-6});
  } else if (c.example == "dilation") {
    const double l = c.lambda;
    if (!(l >= 1.0)) throw InputError("dilation needs lambda >= 1");
    const auto [mu, nu] = dilation_pair(l);
    const double w2 = solve_w2(mu, nu).w2;
    const auto z = certify_or_best(mu, nu, c.tol);
    const double bound = 0.5 * (stats(mu).std_dev + stats(nu).std_dev) * w2;
    const auto up = classify_upper_equality(mu, nu, 1e-9);
    rows.push_back({"w2", "lambda - 1", w2, l - 1.0, 1e-8});
    rows.push_back({"z2", "(lambda^2 - 1)/2", z.midpoint(), 0.5 * (l * l - 1.0), 1e-8});
    rows.push_back({"upper_bound_gap", "(sigma_mu + sigma_nu) w2 / 2", z.midpoint(), bound, 1e-6});
    rows.push_back({"dilation_factor", "lambda", up.lambda.value_or(std::nan("")), l, 1e-9});
  } else {
    throw InputError("unknown example '" + c.example + "' (expected opt14, gauss, noreverse or dilation)");
  }
  return rows;
}

inline int cmd_paper(const RunConfig& c, std::ostream& out) {
  const auto rows = example_rows(c);
  json table = json::array();
  bool all_ok = true;
  for (const auto& r : rows) {
    table.push_back({{"quantity", r.quantity},
                     {"formula", r.formula},
                     {"computed", number(r.computed)},
                     {"reference", number(r.reference)},
                     {"diff", number(r.diff())},
                     {"tol", r.tol},
                     {"ok", r.ok()}});
    all_ok = all_ok && r.ok();
  }
  emit(out, table, c.format);
  return all_ok ? success : not_certified;
}

inline void write_scan_csv(std::ostream& out, const std::vector<ScanRow>& rows) {
  out << "family,param1,param2,w2,z2_lower,z2_upper,gap,ratio_sq,ratio_lin,sigma_mu,sigma_nu,bound_sigma,bound_var,"
         "eq_lower,eq_upper\n";
  for (const auto& r : rows) {
    out << r.family;
    for (double v : {r.param1, r.param2, r.w2, r.z2_lower, r.z2_upper, r.gap, r.ratio_sq, r.ratio_lin, r.sigma_mu,
                     r.sigma_nu, r.bound_sigma, r.bound_var})
      out << ',' << format_number(v);
    out << ',' << (r.eq_lower ? "true" : "false") << ',' << (r.eq_upper ? "true" : "false") << '\n';
  }
}

inline int cmd_scan(const RunConfig& c, std::ostream& out) {
  const auto family = parse_family(c.family);
  if (!family) throw InputError("unknown family '" + c.family + "'");
  FamilySpec spec;
  spec.family = *family;
  switch (*family) {
    case Family::two_atom:
      spec.a = c.a;
      spec.from = c.b_from;
      spec.to = c.b_to;
      spec.steps = c.steps > 0 ? c.steps : 50;
      if (!(spec.a > 0.0) || !(spec.from > spec.a) || !(spec.to >= spec.from))
        throw InputError("two_atom needs 0 < a < b-from <= b-to");
      break;
    case Family::dilation:
      spec.from = c.lambda_from;
      spec.to = c.lambda_to;
      spec.steps = c.steps > 0 ? c.steps : 20;
      if (!(spec.from >= 1.0) || !(spec.to >= spec.from)) throw InputError("dilation needs 1 <= lambda-from <= lambda-to");
      break;
    case Family::noreverse:
      spec.steps = c.n > 0 ? c.n : (c.steps > 0 ? c.steps : 100);
      break;
    case Family::gaussian_1d:
      spec.a = c.sigma1;
      spec.b = c.sigma2;
      spec.n_atoms = c.n_list;
      if (!(spec.a > 0.0) || !(spec.b > 0.0)) throw InputError("gaussian_1d needs positive sigmas");
      break;
    case Family::random:
      spec.dim = c.dim;
      spec.atoms = c.atoms;
      spec.steps = c.n > 0 ? c.n : (c.steps > 0 ? c.steps : 20);
      if (spec.dim < 1 || spec.dim > 3 || spec.atoms < 1) throw InputError("random needs 1 <= dim <= 3 and atoms >= 1");
      break;
  }
  const auto rows = scan_ratio(spec, c.seed, c.threads);
  std::ostringstream buf;
  if (c.format == "json") {
    json arr = json::array();
    for (const auto& r : rows)
      arr.push_back({{"family", r.family}, {"param1", r.param1}, {"param2", r.param2}, {"w2", r.w2},
                     {"z2_lower", number(r.z2_lower)}, {"z2_upper", number(r.z2_upper)}, {"gap", number(r.gap)},
                     {"ratio_sq", number(r.ratio_sq)}, {"ratio_lin", number(r.ratio_lin)}, {"sigma_mu", r.sigma_mu},
                     {"sigma_nu", r.sigma_nu}, {"bound_sigma", r.bound_sigma}, {"bound_var", r.bound_var},
                     {"eq_lower", r.eq_lower}, {"eq_upper", r.eq_upper}});
    buf << arr.dump(2) << '\n';
  } else {
    write_scan_csv(buf, rows);
  }
  if (c.out_path.empty()) {
    out << buf.str();
  } else {
    std::ofstream f(c.out_path, std::ios::binary);
    if (!f) throw InputError("cannot write " + c.out_path);
    f << buf.str();
    emit(out, {{"rows", rows.size()}, {"out", c.out_path}}, "json");
  }
  return success;
}

inline void configure_logging(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("zoloto", sink);
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  bool bad = false;
  if (const char* env = std::getenv("ZOLOTO_LOG")) {
    const std::string v = env;
    if (v == "error")
      level = spdlog::level::err;
    else if (v == "warn")
      level = spdlog::level::warn;
    else if (v == "info")
      level = spdlog::level::info;
    else if (v == "debug")
      level = spdlog::level::debug;
    else
      bad = true;
  }
  logger->set_level(level);
  spdlog::set_default_logger(logger);
  if (bad) spdlog::warn("ZOLOTO_LOG must be one of error, warn, info, debug; using warn");
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging(err);
  RunConfig c;
  CLI::App app{"Exact W2 and certified Z2 distances between discrete measures"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* s, bool pair) {
    if (pair) {
      s->add_option("--mu", c.mu_path, "first measure (JSON)")->check(CLI::ExistingFile);
      s->add_option("--nu", c.nu_path, "second measure (JSON)")->check(CLI::ExistingFile);
    }
    s->add_option("--tol", c.tol, "certification tolerance, in (0, 1e-2]");
    s->add_option("--seed", c.seed, "random seed");
    s->add_option("--out", c.out_path, "output file");
    s->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--plan", c.plan_path, "write the optimal plan here");
    s->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* w2 = app.add_subcommand("w2", "exact quadratic Wasserstein distance");
  auto* z2 = app.add_subcommand("z2", "certified Z2 bracket");
  auto* certify = app.add_subcommand("certify", "Z2 bracket with dual field, plan and optimality checks");
  auto* bounds = app.add_subcommand("bounds", "W2 / Z2 inequalities and equality cases");
  auto* paper = app.add_subcommand("paper", "reproduce a named closed-form example");
  auto* scan = app.add_subcommand("scan", "ratio scan over a family of pairs, CSV output");
  for (auto* s : {w2, z2, certify, bounds}) common(s, true);
  common(paper, false);
  common(scan, false);

  paper->add_option("example", c.example, "opt14, gauss, noreverse or dilation")->required();
  paper->add_option("--a", c.a);
  paper->add_option("--b", c.b);
  paper->add_option("--sigma1", c.sigma1);
  paper->add_option("--sigma2", c.sigma2);
  paper->add_option("--n", c.n);
  paper->add_option("--lambda", c.lambda);

  scan->add_option("family", c.family, "two_atom, gaussian_1d, dilation, random or noreverse")->required();
  scan->add_option("--a", c.a);
  scan->add_option("--b-from", c.b_from);
  scan->add_option("--b-to", c.b_to);
  scan->add_option("--lambda-from", c.lambda_from);
  scan->add_option("--lambda-to", c.lambda_to);
  scan->add_option("--steps", c.steps);
  scan->add_option("--sigma1", c.sigma1);
  scan->add_option("--sigma2", c.sigma2);
  scan->add_option("--n-list", c.n_list)->delimiter(',');
  scan->add_option("--dim", c.dim);
  scan->add_option("--atoms", c.atoms);
  scan->add_option("--n", c.n);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return success;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return success;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return input_error;
  }

  try {
    if (!(c.tol > 0.0) || c.tol > 1e-2) throw InputError("--tol must lie in (0, 1e-2]");
    if (*w2) return cmd_w2(c, out);
    if (*z2) return cmd_z2(c, out, false);
    if (*certify) return cmd_z2(c, out, true);
    if (*bounds) return cmd_bounds(c, out);
    if (*paper) return cmd_paper(c, out);
    if (*scan) {
      if (scan->count("--format") == 0) c.format = "csv";
      return cmd_scan(c, out);
    }
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << '\n';
    return dimension_error;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return input_error;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return input_error;
  } catch (const InvalidMeasure& e) {
    err << "error: " << e.what() << '\n';
    return input_error;
  } catch (const NotConverged& e) {
    err << "error: " << e.what() << '\n';
    return not_certified;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return failure;
  }
  return failure;
}

}  // namespace zoloto::cli
