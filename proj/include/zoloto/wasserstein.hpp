#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "zoloto/errors.hpp"
#include "zoloto/measure.hpp"

namespace zoloto {

/// Transport plan between the atoms of two measures. rows[i] / cols[j] are
/// the atom positions, mass(i, j) the transported mass.
struct Coupling {
  std::vector<Point> rows;
  std::vector<Point> cols;
  Eigen::MatrixXd mass;

  double cost_sq() const {
    double c = 0.0;
    for (Eigen::Index i = 0; i < mass.rows(); ++i)
      for (Eigen::Index j = 0; j < mass.cols(); ++j)
        if (mass(i, j) > 0.0) c += mass(i, j) * (rows[i] - cols[j]).squaredNorm();
    return c;
  }

  /// Largest deviation of row / column sums from the given marginals.
  double marginal_residual(const DiscreteMeasure& first, const DiscreteMeasure& second) const {
    double r = 0.0;
    for (Eigen::Index i = 0; i < mass.rows(); ++i) r = std::max(r, std::abs(mass.row(i).sum() - first[i].w));
    for (Eigen::Index j = 0; j < mass.cols(); ++j) r = std::max(r, std::abs(mass.col(j).sum() - second[j].w));
    return r;
  }
};

struct W2Result {
  double w2 = 0.0;
  Coupling plan;
};

namespace detail {

inline Coupling empty_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  Coupling c;
  for (const auto& a : mu.atoms()) c.rows.push_back(a.x);
  for (const auto& a : nu.atoms()) c.cols.push_back(a.x);
  c.mass = Eigen::MatrixXd::Zero(mu.size(), nu.size());
  return c;
}

}  // namespace detail

namespace detail {

/// Transportation simplex on the bipartite graph rows x cols. The basis is
/// a spanning tree of m + n - 1 cells; node ids are rows 0..m-1 and columns
/// m..m+n-1.
class TransportSimplex {
 public:
  TransportSimplex(const Eigen::MatrixXd& cost, const std::vector<double>& supply, const std::vector<double>& demand)
      : c_(cost), m_(static_cast<int>(supply.size())), n_(static_cast<int>(demand.size())),
        flow_(Eigen::MatrixXd::Zero(m_, n_)), basic_(m_ * n_, 0), adj_(m_ + n_) {
    north_west(supply, demand);
  }

  Eigen::MatrixXd solve(int max_iterations) {
    const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    std::vector<double> u(m_), v(n_);
    int degenerate = 0;
    for (int it = 0; it < max_iterations; ++it) {
      potentials(u, v);
      const bool bland = degenerate > 50;
      int ei = -1, ej = -1;
      double best = -tol;
      for (int i = 0; i < m_ && !(bland && ei >= 0); ++i)
        for (int j = 0; j < n_; ++j) {
          if (basic_[i * n_ + j]) continue;
          const double r = c_(i, j) - u[i] - v[j];
          if (r < best) {
            best = r;
            ei = i;
            ej = j;
            if (bland) break;
          }
        }
      if (ei < 0) return flow_;
      const double theta = pivot(ei, ej);
      degenerate = theta > 0.0 ? 0 : degenerate + 1;
    }
    throw NotConverged("transportation simplex hit its iteration limit");
  }

 private:
  void add_basic(int i, int j) {
    basic_[i * n_ + j] = 1;
    adj_[i].push_back(m_ + j);
    adj_[m_ + j].push_back(i);
  }
  void remove_basic(int i, int j) {
    basic_[i * n_ + j] = 0;
    auto drop = [](std::vector<int>& list, int node) { list.erase(std::find(list.begin(), list.end(), node)); };
    drop(adj_[i], m_ + j);
    drop(adj_[m_ + j], i);
  }

  // Staircase start; exact ties advance the row so the tree stays connected.
  void north_west(const std::vector<double>& supply, const std::vector<double>& demand) {
    int i = 0, j = 0;
    double ra = supply[0], rb = demand[0];
    while (true) {
      const double f = std::max(0.0, std::min(ra, rb));
      flow_(i, j) = f;
      add_basic(i, j);
      if (i == m_ - 1 && j == n_ - 1) break;
      ra -= f;
      rb -= f;
      if (j == n_ - 1 || (i < m_ - 1 && ra <= rb)) {
        ++i;
        ra = supply[i];
      } else {
        ++j;
        rb = demand[j];
      }
    }
  }

  void potentials(std::vector<double>& u, std::vector<double>& v) const {
    std::vector<char> seen(m_ + n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      for (int b : adj_[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        if (a < m_)
          v[b - m_] = c_(a, b - m_) - u[a];
        else
          u[b] = c_(b, a - m_) - v[a - m_];
        stack.push_back(b);
      }
    }
  }

  /// Pushes flow around the cycle closed by cell (ei, ej); returns the step.
  double pivot(int ei, int ej) {
    // Tree path from row node ei to column node m + ej.
    std::vector<int> parent(m_ + n_, -2);
    std::vector<int> queue{ei};
    parent[ei] = -1;
    for (std::size_t q = 0; q < queue.size() && parent[m_ + ej] == -2; ++q)
      for (int b : adj_[queue[q]])
        if (parent[b] == -2) {
          parent[b] = queue[q];
          queue.push_back(b);
        }
    std::vector<std::pair<int, int>> path;  // cells from the column end back to ei
    for (int node = m_ + ej; parent[node] != -1; node = parent[node]) {
      const int a = node, b = parent[node];
      path.push_back(a < m_ ? std::pair{a, b - m_} : std::pair{b, a - m_});
    }
    // Cells at odd positions along the cycle lose flow: path[0], path[2], ...
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const double f = flow_(path[k].first, path[k].second);
      if (f < theta) {
        theta = f;
        leave = static_cast<int>(k);
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      double& f = flow_(path[k].first, path[k].second);
      f = k % 2 == 0 ? f - theta : f + theta;
    }
    flow_(path[leave].first, path[leave].second) = 0.0;
    flow_(ei, ej) = theta;
    remove_basic(path[leave].first, path[leave].second);
    add_basic(ei, ej);
    return theta;
  }

  const Eigen::MatrixXd& c_;
  int m_, n_;
  Eigen::MatrixXd flow_;
  std::vector<char> basic_;
  std::vector<std::vector<int>> adj_;
};

}  // namespace detail

/// Exact W2 from the transportation problem, solved to a vertex by the
/// transportation simplex.
inline W2Result solve_w2(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  const int m = static_cast<int>(mu.size());
  const int n = static_cast<int>(nu.size());
  // Lexicographic order of positions makes the staircase start monotone on the line.
  auto order = [](const DiscreteMeasure& meas) {
    std::vector<int> idx(meas.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const Point& p = meas[a].x;
      const Point& q = meas[b].x;
      return std::lexicographical_compare(p.data(), p.data() + p.size(), q.data(), q.data() + q.size());
    });
    return idx;
  };
  const auto om = order(mu);
  const auto on = order(nu);
  Eigen::MatrixXd cost(m, n);
  std::vector<double> supply(m), demand(n);
  for (int i = 0; i < m; ++i) supply[i] = mu[om[i]].w;
  for (int j = 0; j < n; ++j) demand[j] = nu[on[j]].w;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = (mu[om[i]].x - nu[on[j]].x).squaredNorm();

  detail::TransportSimplex ts(cost, supply, demand);
  const Eigen::MatrixXd flow = ts.solve(100 * (m + n) * (m + n) + 1000);

  W2Result out;
  out.plan = detail::empty_coupling(mu, nu);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.plan.mass(om[i], on[j]) = flow(i, j);
  out.w2 = std::sqrt(std::max(0.0, out.plan.cost_sq()));
  return out;
}

/// Comonotone (quantile) coupling on the line. Ties in cumulative weight
/// advance the first measure before the second.
inline W2Result solve_w2_1d_monotone(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  if (mu.dim() != 1) throw DimensionMismatch("monotone coupling needs one-dimensional measures");

  auto sorted_order = [](const DiscreteMeasure& m) {
    std::vector<std::size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return m[a].x[0] < m[b].x[0]; });
    return idx;
  };
  auto cumulative = [](const DiscreteMeasure& m, const std::vector<std::size_t>& order) {
    std::vector<double> cdf(order.size());
    double s = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) cdf[k] = (s += m[order[k]].w);
    cdf.back() = 1.0;
    return cdf;
  };
  const auto oa = sorted_order(mu);
  const auto ob = sorted_order(nu);
  const auto fa = cumulative(mu, oa);
  const auto fb = cumulative(nu, ob);

  W2Result out;
  out.plan = detail::empty_coupling(mu, nu);
  std::size_t i = 0, j = 0;
  double level = 0.0;
  while (i < oa.size() && j < ob.size()) {
    const double next = std::min(fa[i], fb[j]);
    if (next > level) out.plan.mass(oa[i], ob[j]) += next - level;
    level = std::max(level, next);
    if (fa[i] <= fb[j])
      ++i;
    else
      ++j;
  }
  out.w2 = std::sqrt(std::max(0.0, out.plan.cost_sq()));
  return out;
}

/// W2 between centred 1D Gaussians with standard deviations sigma1, sigma2.
inline double w2_gaussian_1d(double sigma1, double sigma2) { return std::abs(sigma1 - sigma2); }

}  // namespace zoloto
