#pragma once

// Finite dual of Z2: maximize  sum_q u(q) nu(q) - sum_p u(p) mu(p)  over
// 1-fields (u, g) on S = supp mu U supp nu subject to C(p, q) <= 0 for every
// ordered pair, with u(p0) = 0 and g(p0) = 0 at a base point p0.
//
// Restricting an admissible function to S gives a feasible field, and every
// feasible field satisfies the 3-point inequality for all z at each of its
// pairs, so its objective is bounded by the cost of any 3-plan. The finite
// problem therefore has the same value as Z2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zoloto/measure.hpp"

namespace zoloto {

/// Scalar value and gradient attached to each point of a finite set.
struct OneField {
  std::vector<Point> points;
  std::vector<double> values;
  std::vector<Point> gradients;
  std::size_t base = 0;  ///< gauge point: values[base] == 0, gradients[base] == 0

  std::size_t size() const noexcept { return points.size(); }
  std::size_t dim() const noexcept { return points.empty() ? 0 : static_cast<std::size_t>(points.front().size()); }

  std::optional<std::size_t> find(const Point& x, double tol = 1e-9) const {
    std::optional<std::size_t> best;
    double best_d = tol;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = (points[i] - x).norm();
      if (d <= best_d) {
        best = i;
        best_d = d;
      }
    }
    return best;
  }
};

/// C(p, q) = u(q) - u(p) - <g(p) + g(q), q - p>/2 + |g(q) - g(p)|^2/4 - |q - p|^2/4.
inline double pairwise_constraint(const Point& p, double u_p, const Point& g_p, const Point& q, double u_q,
                                  const Point& g_q) {
  const Point dx = q - p;
  const Point dg = g_q - g_p;
  return u_q - u_p - 0.5 * (g_p + g_q).dot(dx) + 0.25 * dg.squaredNorm() - 0.25 * dx.squaredNorm();
}

/// 3-point gap (u_y + <g_y, z - y>) - (u_x + <g_x, z - x>) - (|z - x|^2 + |z - y|^2)/2.
inline double three_point_gap(const Point& x, double u_x, const Point& g_x, const Point& y, double u_y,
                              const Point& g_y, const Point& z) {
  return (u_y + g_y.dot(z - y)) - (u_x + g_x.dot(z - x)) - 0.5 * ((z - x).squaredNorm() + (z - y).squaredNorm());
}

/// Maximizer of the 3-point gap in z: (x + y)/2 + (g_y - g_x)/2.
inline Point gap_maximizer(const Point& x, const Point& g_x, const Point& y, const Point& g_y) {
  return 0.5 * (x + y) + 0.5 * (g_y - g_x);
}

inline double field_constraint(const OneField& f, std::size_t i, std::size_t j) {
  return pairwise_constraint(f.points[i], f.values[i], f.gradients[i], f.points[j], f.values[j], f.gradients[j]);
}

struct AdmissibilityReport {
  bool ok = true;
  std::pair<std::size_t, std::size_t> worst_pair{0, 0};
  double worst_value = -std::numeric_limits<double>::infinity();
};

inline AdmissibilityReport check_field_admissible(const OneField& f, double tol) {
  AdmissibilityReport r;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (i == j) continue;
      const double c = field_constraint(f, i, j);
      if (c > r.worst_value) {
        r.worst_value = c;
        r.worst_pair = {i, j};
      }
    }
  if (f.size() < 2) r.worst_value = 0.0;
  r.ok = r.worst_value <= tol;
  return r;
}

/// sum_q u(q) nu(q) - sum_p u(p) mu(p); every atom must be a point of the field.
inline double field_objective(const OneField& f, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  double v = 0.0;
  for (const auto& a : nu.atoms()) {
    const auto k = f.find(a.x);
    if (!k) throw InvalidMeasure("atom of nu is not a point of the field");
    v += a.w * f.values[*k];
  }
  for (const auto& a : mu.atoms()) {
    const auto k = f.find(a.x);
    if (!k) throw InvalidMeasure("atom of mu is not a point of the field");
    v -= a.w * f.values[*k];
  }
  return v;
}

/// sum_q <q, g(q)>/2 nu(q) - sum_p <p, g(p)>/2 mu(p).
inline double magic_formula_value(const OneField& f, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  double v = 0.0;
  for (const auto& a : nu.atoms()) {
    const auto k = f.find(a.x);
    if (!k) throw InvalidMeasure("atom of nu is not a point of the field");
    v += 0.5 * a.w * a.x.dot(f.gradients[*k]);
  }
  for (const auto& a : mu.atoms()) {
    const auto k = f.find(a.x);
    if (!k) throw InvalidMeasure("atom of mu is not a point of the field");
    v -= 0.5 * a.w * a.x.dot(f.gradients[*k]);
  }
  return v;
}

/// Adds the affine function that moves the field to u(base) = 0, g(base) = 0.
inline OneField regauge(OneField f, std::size_t base) {
  const Point p0 = f.points[base];
  const double u0 = f.values[base];
  const Point g0 = f.gradients[base];
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.values[i] -= u0 + g0.dot(f.points[i] - p0);
    f.gradients[i] -= g0;
  }
  f.base = base;
  return f;
}

/// Points of supp mu U supp nu with their mu- and nu-weights.
struct WorkingSet {
  std::vector<Point> points;
  std::vector<double> mu_weight;
  std::vector<double> nu_weight;
};

inline WorkingSet working_set(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double merge_tol = 1e-9) {
  require_same_dim(mu, nu);
  WorkingSet s;
  auto add = [&](const Point& x, double wm, double wn) {
    for (std::size_t i = 0; i < s.points.size(); ++i)
      if ((s.points[i] - x).norm() <= merge_tol) {
        s.mu_weight[i] += wm;
        s.nu_weight[i] += wn;
        return;
      }
    s.points.push_back(x);
    s.mu_weight.push_back(wm);
    s.nu_weight.push_back(wn);
  };
  for (const auto& a : mu.atoms()) add(a.x, a.w, 0.0);
  for (const auto& a : nu.atoms()) add(a.x, 0.0, a.w);
  return s;
}

/// Point nearest to c; near-ties go to the lexicographically smallest point.
inline std::size_t nearest_point(const std::vector<Point>& points, const Point& c) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double di = (points[i] - c).norm();
    const double db = (points[best] - c).norm();
    if (di < db - 1e-12) {
      best = i;
    } else if (di <= db + 1e-12) {
      const auto& a = points[i];
      const auto& b = points[best];
      if (std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size())) best = i;
    }
  }
  return best;
}

/// Field u = sign |x - p0|^2 / 2 on the given points, already gauged at base.
inline OneField quadratic_field(std::vector<Point> points, double sign, std::size_t base) {
  OneField f;
  f.base = base;
  const Point p0 = points[base];
  for (const auto& p : points) {
    f.values.push_back(sign * 0.5 * (p - p0).squaredNorm());
    f.gradients.push_back(sign * (p - p0));
  }
  f.points = std::move(points);
  return f;
}

struct DualReport {
  double value = 0.0;  ///< objective of `field`
  OneField field;
  double max_violation = 0.0;  ///< max(0, max C(p, q))
  std::vector<std::pair<std::size_t, std::size_t>> active_pairs;
  int iterations = 0;
  bool converged = false;
  double complementarity = 0.0;  ///< sum of multiplier * slack at exit
};

struct DualOptions {
  double feasibility_tol = 1e-9;
  double active_tol = 1e-7;
  int max_iterations = 300;
  std::size_t max_points = 200;
};

inline std::vector<std::pair<std::size_t, std::size_t>> active_pairs(const OneField& f, double active_tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j)
      if (i != j && field_constraint(f, i, j) >= -active_tol) out.emplace_back(i, j);
  return out;
}

inline DualReport make_dual_report(OneField field, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   double active_tol) {
  DualReport r;
  r.value = field_objective(field, mu, nu);
  const auto adm = check_field_admissible(field, 0.0);
  r.max_violation = std::max(0.0, adm.worst_value);
  r.active_pairs = active_pairs(field, active_tol);
  r.field = std::move(field);
  return r;
}

namespace detail {

/// Primal-dual interior-point method for the field problem. Iterates stay
/// strictly feasible (all C < 0), so every iterate is a valid lower bound.
class FieldIpm {
 public:
  FieldIpm(const WorkingSet& ws, std::size_t base, const DualOptions& opt)
      : ws_(ws), base_(base), opt_(opt), n_(ws.points.size()), d_(ws.points.front().size()), block_(1 + d_) {
    slot_.assign(n_, -1);
    int next = 0;
    for (std::size_t i = 0; i < n_; ++i)
      if (i != base_) slot_[i] = (next++) * static_cast<int>(block_);
    nv_ = next * static_cast<int>(block_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (i != j) pairs_.emplace_back(i, j);
    weight_.setZero(nv_);
    for (std::size_t i = 0; i < n_; ++i)
      if (slot_[i] >= 0) weight_[slot_[i]] = ws.nu_weight[i] - ws.mu_weight[i];
    scale_ = 0.0;
    for (const auto& [i, j] : pairs_) scale_ = std::max(scale_, 0.25 * (ws.points[i] - ws.points[j]).squaredNorm());
    scale_ = std::max(scale_, 1e-300);
  }

  Eigen::VectorXd v;
  int iterations = 0;
  double complementarity = 0.0;
  bool converged = false;

  void solve() {
    const std::size_t K = pairs_.size();
    v.setZero(nv_);
    if (nv_ == 0) {
      converged = true;
      return;
    }
    Eigen::VectorXd s(K), lam(K), dlam(K), lin(K), quad(K);
    evaluate(v, s);
    for (std::size_t k = 0; k < K; ++k) lam[k] = 1.0 / static_cast<double>(K);

    Eigen::VectorXd rd(nv_), rhs(nv_), dv(nv_), dv_aff(nv_);
    Eigen::MatrixXd M(nv_, nv_);
    const double gap_target = 1e-15 * scale_ * static_cast<double>(K);
    int stalls = 0;
    for (iterations = 0; iterations < opt_.max_iterations; ++iterations) {
      complementarity = lam.dot(s);
      dual_residual(v, lam, rd);
      const double rd_norm = rd.lpNorm<Eigen::Infinity>();
      if (complementarity <= gap_target && rd_norm <= 1e-13) {
        converged = true;
        break;
      }
      const double mu_now = complementarity / static_cast<double>(K);

      assemble(v, s, lam, M);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(M);

      // Predictor (pure Newton toward complementarity zero).
      newton_rhs(v, s, lam, rd, 0.0, rhs);
      dv_aff = ldlt.solve(rhs);
      directions(v, s, lam, dv_aff, 0.0, dlam, lin, quad);
      double a_aff = std::min(1.0, std::min(step_multipliers(lam, dlam, 1.0), step_slacks(s, lin, quad, 1.0)));
      double mu_aff = 0.0;
      for (std::size_t k = 0; k < K; ++k)
        mu_aff += (lam[k] + a_aff * dlam[k]) * (s[k] - a_aff * lin[k] - a_aff * a_aff * quad[k]);
      mu_aff /= static_cast<double>(K);
      const double sigma = std::clamp(std::pow(mu_aff / mu_now, 3.0), 0.0, 1.0);

      // Corrector with centring target sigma * mu.
      const double tau = sigma * mu_now;
      newton_rhs(v, s, lam, rd, tau, rhs);
      dv = ldlt.solve(rhs);
      directions(v, s, lam, dv, tau, dlam, lin, quad);
      const double alpha = std::min(1.0, std::min(step_multipliers(lam, dlam, 0.995), step_slacks(s, lin, quad, 0.995)));
      if (!(alpha > 1e-12) || !dv.allFinite()) {
        if (++stalls > 3) break;
        continue;
      }
      v += alpha * dv;
      lam += alpha * dlam;
      for (std::size_t k = 0; k < K; ++k) lam[k] = std::max(lam[k], 1e-300);
      evaluate(v, s);
      if ((s.array() <= 0.0).any()) break;  // should not happen with exact step control
    }
    complementarity = lam.dot(s);
    lam_ = lam;
    slack_ = s;
  }

  /// Newton refinement on the constraints the interior-point iterate marks
  /// as active (slack below multiplier). Replaces v only when the refined
  /// point satisfies the KKT system of the full problem to working precision.
  bool polish() {
    const std::size_t K = pairs_.size();
    if (nv_ == 0 || lam_.size() != static_cast<Eigen::Index>(K)) return false;
    std::vector<char> in(K, 0);
    for (std::size_t k = 0; k < K; ++k) in[k] = slack_[k] < lam_[k];

    for (int round = 0; round < 8; ++round) {
      std::vector<std::size_t> act;
      for (std::size_t k = 0; k < K; ++k)
        if (in[k]) act.push_back(k);
      const int na = static_cast<int>(act.size());
      Eigen::VectorXd x = v;
      Eigen::VectorXd l(na);
      for (int a = 0; a < na; ++a) l[a] = lam_[act[a]];

      Eigen::VectorXd F(nv_ + na);
      Eigen::MatrixXd J(nv_ + na, nv_ + na);
      auto residual = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& ll) {
        F.setZero();
        F.head(nv_) = -weight_;
        for (int a = 0; a < na; ++a) {
          const auto [i, j] = pairs_[act[a]];
          Eigen::VectorXd head = F.head(nv_);
          add_scaled_grad(local_gradient(xx, i, j), i, j, ll[a], head);
          F.head(nv_) = head;
          F[nv_ + a] = pairwise_constraint(ws_.points[i], u_of(xx, i), g_of(xx, i), ws_.points[j], u_of(xx, j),
                                           g_of(xx, j));
        }
        return F.lpNorm<Eigen::Infinity>();
      };

      double res = residual(x, l);
      for (int it = 0; it < 40 && res > 1e-15 * (1.0 + scale_); ++it) {
        J.setZero();
        for (int a = 0; a < na; ++a) {
          const auto [i, j] = pairs_[act[a]];
          Eigen::VectorXd gk = Eigen::VectorXd::Zero(nv_);
          add_scaled_grad(local_gradient(x, i, j), i, j, 1.0, gk);
          J.block(0, nv_ + a, nv_, 1) = gk;
          J.block(nv_ + a, 0, 1, nv_) = gk.transpose();
          const double h = 0.5 * l[a];
          for (std::size_t c = 0; c < d_; ++c) {
            const int gi = slot_[i] < 0 ? -1 : slot_[i] + 1 + static_cast<int>(c);
            const int gj = slot_[j] < 0 ? -1 : slot_[j] + 1 + static_cast<int>(c);
            if (gi >= 0) J(gi, gi) += h;
            if (gj >= 0) J(gj, gj) += h;
            if (gi >= 0 && gj >= 0) {
              J(gi, gj) -= h;
              J(gj, gi) -= h;
            }
          }
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
        cod.setThreshold(1e-11);
        const Eigen::VectorXd step = cod.solve(-F);
        if (!step.allFinite()) break;
        double t = 1.0;
        Eigen::VectorXd xn, ln;
        double rn = res;
        for (int half = 0; half < 20; ++half, t *= 0.5) {
          xn = x + t * step.head(nv_);
          ln = l + t * step.tail(na);
          rn = residual(xn, ln);
          if (rn < res) break;
        }
        if (!(rn < res)) {
          residual(x, l);
          break;
        }
        x = xn;
        l = ln;
        res = rn;
      }
      if (res > 1e-12 * (1.0 + scale_)) return false;

      // Multiplier signs and the constraints left out of the active set.
      bool changed = false;
      for (int a = 0; a < na; ++a)
        if (l[a] < -1e-10) {
          in[act[a]] = 0;
          changed = true;
        }
      Eigen::VectorXd s(K);
      evaluate(x, s);
      for (std::size_t k = 0; k < K; ++k)
        if (!in[k] && s[k] < -1e-13 * scale_) {
          in[k] = 1;
          changed = true;
        }
      if (changed) continue;
      v = x;
      return true;
    }
    return false;
  }

  OneField field() const {
    OneField f;
    f.points = ws_.points;
    f.base = base_;
    f.values.assign(n_, 0.0);
    f.gradients.assign(n_, Point::Zero(d_));
    for (std::size_t i = 0; i < n_; ++i) {
      if (slot_[i] < 0) continue;
      f.values[i] = v[slot_[i]];
      f.gradients[i] = v.segment(slot_[i] + 1, d_);
    }
    return f;
  }

 private:
  double u_of(const Eigen::VectorXd& x, std::size_t i) const { return slot_[i] < 0 ? 0.0 : x[slot_[i]]; }
  Point g_of(const Eigen::VectorXd& x, std::size_t i) const {
    return slot_[i] < 0 ? Point(Point::Zero(d_)) : Point(x.segment(slot_[i] + 1, d_));
  }

  /// s_k = -C_k(x).
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& s) const {
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      s[k] = -pairwise_constraint(ws_.points[i], u_of(x, i), g_of(x, i), ws_.points[j], u_of(x, j), g_of(x, j));
    }
  }

  /// Gradient of C_k restricted to the variables of points i and j.
  struct LocalGrad {
    double du_i, du_j;
    Point dg_i, dg_j;
  };
  LocalGrad local_gradient(const Eigen::VectorXd& x, std::size_t i, std::size_t j) const {
    const Point dx = ws_.points[j] - ws_.points[i];
    const Point dg = g_of(x, j) - g_of(x, i);
    return {-1.0, 1.0, -0.5 * dx - 0.5 * dg, -0.5 * dx + 0.5 * dg};
  }

  double grad_dot(const LocalGrad& lg, std::size_t i, std::size_t j, const Eigen::VectorXd& dir) const {
    double r = 0.0;
    if (slot_[i] >= 0) r += lg.du_i * dir[slot_[i]] + lg.dg_i.dot(dir.segment(slot_[i] + 1, d_));
    if (slot_[j] >= 0) r += lg.du_j * dir[slot_[j]] + lg.dg_j.dot(dir.segment(slot_[j] + 1, d_));
    return r;
  }

  void add_scaled_grad(const LocalGrad& lg, std::size_t i, std::size_t j, double c, Eigen::VectorXd& out) const {
    if (slot_[i] >= 0) {
      out[slot_[i]] += c * lg.du_i;
      out.segment(slot_[i] + 1, d_) += c * lg.dg_i;
    }
    if (slot_[j] >= 0) {
      out[slot_[j]] += c * lg.du_j;
      out.segment(slot_[j] + 1, d_) += c * lg.dg_j;
    }
  }

  /// grad f0 + sum lam_k grad C_k, with f0 = -objective.
  void dual_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& lam, Eigen::VectorXd& rd) const {
    rd = -weight_;
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      add_scaled_grad(local_gradient(x, i, j), i, j, lam[k], rd);
    }
  }

  /// M = sum lam_k Hess C_k + sum (lam_k / s_k) grad C_k grad C_k'.
  void assemble(const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Eigen::VectorXd& lam,
                Eigen::MatrixXd& M) const {
    M.setZero();
    std::vector<int> idx;
    std::vector<double> val;
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      const auto lg = local_gradient(x, i, j);
      idx.clear();
      val.clear();
      for (const auto& [pt, du, dgp] : {std::tuple{i, lg.du_i, &lg.dg_i}, std::tuple{j, lg.du_j, &lg.dg_j}}) {
        if (slot_[pt] < 0) continue;
        idx.push_back(slot_[pt]);
        val.push_back(du);
        for (std::size_t c = 0; c < d_; ++c) {
          idx.push_back(slot_[pt] + 1 + static_cast<int>(c));
          val.push_back((*dgp)[c]);
        }
      }
      const double w = lam[k] / s[k];
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) M(idx[a], idx[b]) += w * val[a] * val[b];
      // Hessian of C_k: (1/2) [[I, -I], [-I, I]] on (g_i, g_j).
      const double h = 0.5 * lam[k];
      for (std::size_t c = 0; c < d_; ++c) {
        const int gi = slot_[i] < 0 ? -1 : slot_[i] + 1 + static_cast<int>(c);
        const int gj = slot_[j] < 0 ? -1 : slot_[j] + 1 + static_cast<int>(c);
        if (gi >= 0) M(gi, gi) += h;
        if (gj >= 0) M(gj, gj) += h;
        if (gi >= 0 && gj >= 0) {
          M(gi, gj) -= h;
          M(gj, gi) -= h;
        }
      }
    }
    M.diagonal().array() += 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
  }

  /// rhs = -rd - sum grad C_k (tau / s_k - lam_k).
  void newton_rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Eigen::VectorXd& lam,
                  const Eigen::VectorXd& rd, double tau, Eigen::VectorXd& rhs) const {
    rhs = -rd;
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      add_scaled_grad(local_gradient(x, i, j), i, j, -(tau / s[k] - lam[k]), rhs);
    }
  }

  /// Multiplier step and the exact slack change s_k(a) = s_k - a lin_k - a^2 quad_k.
  void directions(const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Eigen::VectorXd& lam,
                  const Eigen::VectorXd& dv, double tau, Eigen::VectorXd& dlam, Eigen::VectorXd& lin,
                  Eigen::VectorXd& quad) const {
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      const double gd = grad_dot(local_gradient(x, i, j), i, j, dv);
      dlam[k] = (tau - lam[k] * s[k] + lam[k] * gd) / s[k];
      lin[k] = gd;
      const Point ddg = g_of(dv, j) - g_of(dv, i);
      quad[k] = 0.25 * ddg.squaredNorm();
    }
  }

  static double step_multipliers(const Eigen::VectorXd& lam, const Eigen::VectorXd& dlam, double eta) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < lam.size(); ++k)
      if (dlam[k] < 0.0) a = std::min(a, -eta * lam[k] / dlam[k]);
    return a;
  }

  /// Largest a with s_k(a) >= (1 - eta) s_k for all k.
  static double step_slacks(const Eigen::VectorXd& s, const Eigen::VectorXd& lin, const Eigen::VectorXd& quad,
                            double eta) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      const double c = eta * s[k];
      const double b = lin[k];
      const double q = quad[k];
      double ak;
      if (q <= 0.0) {
        ak = b > 0.0 ? c / b : std::numeric_limits<double>::infinity();
      } else {
        const double disc = std::sqrt(b * b + 4.0 * q * c);
        ak = b >= 0.0 ? 2.0 * c / (b + disc) : (-b + disc) / (2.0 * q);
      }
      a = std::min(a, ak);
    }
    return a;
  }

  const WorkingSet& ws_;
  std::size_t base_;
  DualOptions opt_;
  std::size_t n_, d_, block_;
  int nv_ = 0;
  std::vector<int> slot_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  Eigen::VectorXd weight_;
  double scale_ = 1.0;
  Eigen::VectorXd lam_, slack_;
};

}  // namespace detail

/// Solves the finite Z2 dual. Throws BarycentreMismatch when the barycentres
/// differ by more than 1e-9 and NotConverged when the interior-point method
/// stops with complementarity above tol.
inline DualReport solve_dual_z2(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tol = 1e-8,
                                const DualOptions& options = {}) {
  require_same_dim(mu, nu);
  const Point c_mu = barycentre(mu);
  const double mismatch = (c_mu - barycentre(nu)).norm();
  if (mismatch > 1e-9) throw BarycentreMismatch(mismatch);

  const WorkingSet ws = working_set(mu, nu);
  if (ws.points.size() > options.max_points)
    throw InvalidMeasure("working set has " + std::to_string(ws.points.size()) + " points, limit is " +
                         std::to_string(options.max_points));
  const std::size_t base = nearest_point(ws.points, c_mu);

  detail::FieldIpm ipm(ws, base, options);
  ipm.solve();
  ipm.polish();

  DualReport report = make_dual_report(ipm.field(), mu, nu, options.active_tol);
  report.iterations = ipm.iterations;
  report.complementarity = ipm.complementarity;
  report.converged = ipm.complementarity <= tol && report.max_violation <= options.feasibility_tol;
  if (!report.converged)
    throw NotConverged("Z2 dual stopped after " + std::to_string(ipm.iterations) +
                       " iterations with complementarity " + std::to_string(ipm.complementarity));
  return report;
}

}  // namespace zoloto
