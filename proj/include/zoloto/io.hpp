#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoloto/errors.hpp"
#include "zoloto/measure.hpp"
#include "zoloto/transport_plans.hpp"
#include "zoloto/wasserstein.hpp"
#include "zoloto/zolotarev.hpp"

namespace zoloto::io {

using json = nlohmann::ordered_json;

inline json to_json(const Point& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

inline Point point_from_json(const json& j, std::size_t dim) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  if (j.size() != dim)
    throw ParseError("vector has length " + std::to_string(j.size()) + ", expected " + std::to_string(dim));
  Point p(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw ParseError("vector entry is not a number");
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return p;
}

// Measures: {"dim": d, "atoms": [{"x": [...], "w": ...}, ...]}

inline json to_json(const DiscreteMeasure& m) {
  json atoms = json::array();
  for (const auto& a : m.atoms()) atoms.push_back({{"x", to_json(a.x)}, {"w", a.w}});
  return {{"dim", m.dim()}, {"atoms", atoms}};
}

inline DiscreteMeasure measure_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("dim") || !j.contains("atoms")) throw ParseError("measure needs dim and atoms");
    if (!j["dim"].is_number_integer() || j["dim"].get<long long>() < 1) throw ParseError("dim must be a positive integer");
    const auto dim = j["dim"].get<std::size_t>();
    if (!j["atoms"].is_array()) throw ParseError("atoms must be an array");
    std::vector<Atom> atoms;
    for (const auto& a : j["atoms"]) {
      if (!a.is_object() || !a.contains("x") || !a.contains("w")) throw ParseError("atom needs x and w");
      if (!a["w"].is_number()) throw ParseError("weight is not a number");
      const double w = a["w"].get<double>();
      if (!(w > 0.0)) throw ParseError("weight must be positive");
      atoms.push_back({point_from_json(a["x"], dim), w});
    }
    return DiscreteMeasure(dim, std::move(atoms));
  } catch (const InvalidMeasure& e) {
    throw ParseError(e.what());
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline DiscreteMeasure read_measure(const std::string& path) { return measure_from_json(read_json_file(path)); }

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// Couplings, 3-plans and dual reports.

inline json to_json(const Coupling& c) {
  json entries = json::array();
  for (Eigen::Index i = 0; i < c.mass.rows(); ++i)
    for (Eigen::Index j = 0; j < c.mass.cols(); ++j)
      if (c.mass(i, j) > 0.0)
        entries.push_back({{"x", to_json(c.rows[static_cast<std::size_t>(i)])},
                           {"y", to_json(c.cols[static_cast<std::size_t>(j)])},
                           {"m", c.mass(i, j)}});
  return {{"entries", entries}};
}

inline json to_json(const ThreePlan& pi) {
  json triples = json::array();
  for (const auto& t : pi.triples)
    triples.push_back({{"x", to_json(t.x)}, {"y", to_json(t.y)}, {"z", to_json(t.z)}, {"m", t.m}});
  return {{"triples", triples}};
}

inline ThreePlan three_plan_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("triples") || !j["triples"].is_array())
      throw ParseError("plan needs a triples array");
    ThreePlan pi;
    std::size_t dim = 0;
    for (const auto& t : j["triples"]) {
      if (!t.contains("x") || !t.contains("y") || !t.contains("z") || !t.contains("m"))
        throw ParseError("triple needs x, y, z and m");
      if (dim == 0) dim = t["x"].size();
      if (dim == 0) throw ParseError("empty position vector");
      pi.triples.push_back({point_from_json(t["x"], dim), point_from_json(t["y"], dim), point_from_json(t["z"], dim),
                            t["m"].get<double>()});
    }
    return pi;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

inline json to_json(const OneField& f) {
  json pts = json::array(), vals = json::array(), grads = json::array();
  for (std::size_t i = 0; i < f.size(); ++i) {
    pts.push_back(to_json(f.points[i]));
    vals.push_back(f.values[i]);
    grads.push_back(to_json(f.gradients[i]));
  }
  return {{"points", pts}, {"values", vals}, {"gradients", grads}};
}

inline json to_json(const DualReport& r) {
  json pairs = json::array();
  for (const auto& [i, j] : r.active_pairs) pairs.push_back({i, j});
  return {{"value", r.value}, {"max_violation", r.max_violation}, {"active_pairs", pairs}, {"field", to_json(r.field)}};
}

}  // namespace zoloto::io
