#pragma once

// Dense-basis revised simplex for  min c'x  s.t.  Ax = b, x >= 0.
//
// Columns are stored sparse; the basis inverse is kept dense and refreshed
// from an LU factorization at regular intervals and before reporting a
// solution. Phase one drives artificial variables out, phase two optimizes.
// Dantzig pricing with a Harris two-pass ratio test; after a run of
// degenerate pivots Bland's smallest-index rule takes over until the
// objective moves again.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace zoloto::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct Options {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-11;
  double pivot_tol = 1e-10;
  int max_iterations = 500000;
  int refactor_interval = 100;
  int degenerate_run = 40;  ///< degenerate pivots before switching to Bland
};

class Problem {
 public:
  explicit Problem(int rows) : rhs_(rows, 0.0) { col_start_.push_back(0); }

  int rows() const noexcept { return static_cast<int>(rhs_.size()); }
  int cols() const noexcept { return static_cast<int>(cost_.size()); }

  void set_rhs(int row, double value) { rhs_.at(row) = value; }
  double rhs(int row) const { return rhs_[row]; }

  /// Appends a column; entries are (row, coefficient) pairs with distinct rows.
  int add_column(double cost, std::span<const std::pair<int, double>> entries) {
    for (const auto& [r, v] : entries) {
      if (v == 0.0) continue;
      row_index_.push_back(r);
      values_.push_back(v);
    }
    col_start_.push_back(static_cast<int>(row_index_.size()));
    cost_.push_back(cost);
    return cols() - 1;
  }
  int add_column(double cost, std::initializer_list<std::pair<int, double>> entries) {
    return add_column(cost, std::span<const std::pair<int, double>>(entries.begin(), entries.size()));
  }

  double cost(int j) const { return cost_[j]; }
  int col_begin(int j) const { return col_start_[j]; }
  int col_end(int j) const { return col_start_[j + 1]; }
  int row_at(int k) const { return row_index_[k]; }
  double value_at(int k) const { return values_[k]; }

 private:
  std::vector<double> rhs_;
  std::vector<double> cost_;
  std::vector<int> col_start_;
  std::vector<int> row_index_;
  std::vector<double> values_;
};

struct Solution {
  Status status = Status::infeasible;
  double objective = 0.0;
  std::vector<double> x;      ///< primal values, structural columns only
  std::vector<double> duals;  ///< row duals y with c - A'y >= 0 at optimum
  double infeasibility = 0.0; ///< phase-one objective at termination
  int iterations = 0;
};

namespace detail {

class Simplex {
 public:
  Simplex(const Problem& p, const Options& opt)
      : p_(p), opt_(opt), m_(p.rows()), n_(p.cols()), sign_(m_, 1.0), b_(m_) {
    for (int i = 0; i < m_; ++i) {
      if (p.rhs(i) < 0.0) sign_[i] = -1.0;
      b_[i] = sign_[i] * p.rhs(i);
    }
    basis_.resize(m_);
    is_basic_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      is_basic_[n_ + i] = i;
    }
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    xb_ = b_;
  }

  Solution run() {
    Solution sol;
    double b_scale = 1.0;
    for (int i = 0; i < m_; ++i) b_scale = std::max(b_scale, b_[i]);

    // Phase one.
    phase_ = 1;
    auto st = iterate();
    double art = artificial_mass();
    sol.infeasibility = art;
    if (st == Status::iteration_limit) return finish(sol, st);
    if (art > opt_.feasibility_tol * b_scale) return finish(sol, Status::infeasible);
    drive_out_artificials();

    // Phase two.
    phase_ = 2;
    st = iterate();
    return finish(sol, st);
  }

 private:
  bool is_artificial(int j) const { return j >= n_; }

  double column_cost(int j) const {
    if (phase_ == 1) return is_artificial(j) ? 1.0 : 0.0;
    return is_artificial(j) ? 0.0 : p_.cost(j);
  }

  /// Column j of the row-sign-adjusted constraint matrix, as a dense vector.
  void load_column(int j, Eigen::VectorXd& a) const {
    a.setZero(m_);
    if (is_artificial(j)) {
      a[j - n_] = 1.0;
      return;
    }
    for (int k = p_.col_begin(j); k < p_.col_end(j); ++k) a[p_.row_at(k)] = sign_[p_.row_at(k)] * p_.value_at(k);
  }

  double dot_column(const Eigen::VectorXd& y, int j) const {
    if (is_artificial(j)) return y[j - n_];
    double s = 0.0;
    for (int k = p_.col_begin(j); k < p_.col_end(j); ++k) s += y[p_.row_at(k)] * sign_[p_.row_at(k)] * p_.value_at(k);
    return s;
  }

  void ftran(int j, Eigen::VectorXd& out) const {
    if (is_artificial(j)) {
      out = binv_.col(j - n_);
      return;
    }
    out.setZero(m_);
    for (int k = p_.col_begin(j); k < p_.col_end(j); ++k)
      out.noalias() += (sign_[p_.row_at(k)] * p_.value_at(k)) * binv_.col(p_.row_at(k));
  }

  void refactor() {
    Eigen::MatrixXd bmat(m_, m_);
    Eigen::VectorXd a;
    for (int i = 0; i < m_; ++i) {
      load_column(basis_[i], a);
      bmat.col(i) = a;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    since_refactor_ = 0;
  }

  Eigen::VectorXd duals() const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = column_cost(basis_[i]);
    return binv_.transpose() * cb;
  }

  double artificial_mass() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i)
      if (is_artificial(basis_[i])) s += std::max(0.0, xb_[i]);
    return s;
  }

  void pivot(int entering, int row, const Eigen::VectorXd& col) {
    const double piv = col[row];
    const Eigen::RowVectorXd pivot_row = binv_.row(row) / piv;
    binv_.noalias() -= col * pivot_row;
    binv_.row(row) = pivot_row;
    is_basic_[basis_[row]] = -1;
    basis_[row] = entering;
    is_basic_[entering] = row;
    if (++since_refactor_ >= opt_.refactor_interval) refactor();
  }

  int price(const Eigen::VectorXd& y, bool bland) const {
    int best = -1;
    double best_d = -opt_.optimality_tol;
    for (int j = 0; j < n_ + m_; ++j) {
      if (is_basic_[j] >= 0) continue;
      if (phase_ == 2 && is_artificial(j)) continue;
      const double d = column_cost(j) - dot_column(y, j);
      if (d < best_d) {
        best = j;
        if (bland) return j;
        best_d = d;
      }
    }
    return best;
  }

  Status iterate() {
    Eigen::VectorXd col(m_);
    bool bland = false;
    int degenerate = 0;
    bool fresh = false;
    while (true) {
      if (iterations_ >= opt_.max_iterations) return Status::iteration_limit;
      const Eigen::VectorXd y = duals();
      const int entering = price(y, bland);
      if (entering < 0) {
        if (fresh) return Status::optimal;
        refactor();
        fresh = true;
        continue;
      }
      fresh = false;
      ftran(entering, col);

      // Harris two-pass ratio test: bound the step with relaxed ratios, then
      // take the largest pivot among rows that hit the bound.
      int row = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      const double col_max = std::max(1.0, col.cwiseAbs().maxCoeff());
      const double piv_tol = opt_.pivot_tol * col_max;
      for (int i = 0; i < m_; ++i) {
        // Artificials parked in redundant rows must stay at zero.
        if (phase_ == 2 && is_artificial(basis_[i]) && std::abs(col[i]) > piv_tol) {
          if (row < 0 || std::abs(col[i]) > std::abs(col[row])) row = i;
        }
      }
      if (row >= 0) {
        best_ratio = 0.0;
      } else {
        double bound = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m_; ++i)
          if (col[i] > piv_tol) bound = std::min(bound, (std::max(0.0, xb_[i]) + opt_.feasibility_tol) / col[i]);
        double best_piv = 0.0;
        for (int i = 0; i < m_; ++i) {
          const double a = col[i];
          if (a <= piv_tol || std::max(0.0, xb_[i]) / a > bound) continue;
          if (bland) {
            if (a < 1e-3 * col_max) continue;
            if (row < 0 || basis_[i] < basis_[row]) row = i;
          } else if (a > best_piv) {
            best_piv = a;
            row = i;
          }
        }
        if (bland && row < 0)
          for (int i = 0; i < m_; ++i) {
            const double a = col[i];
            if (a > piv_tol && std::max(0.0, xb_[i]) / a <= bound && (row < 0 || a > col[row])) row = i;
          }
        if (row < 0) return Status::unbounded;
        best_ratio = std::max(0.0, xb_[row]) / col[row];
      }
      const double theta = best_ratio;
      xb_.noalias() -= theta * col;
      xb_[row] = theta;
      for (int i = 0; i < m_; ++i)
        if (xb_[i] < 0.0 && xb_[i] > -opt_.feasibility_tol) xb_[i] = 0.0;
      pivot(entering, row, col);
      ++iterations_;

      if (theta <= 1e-13) {
        if (++degenerate >= opt_.degenerate_run) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

  void drive_out_artificials() {
    refactor();
    Eigen::VectorXd col(m_);
    for (int i = 0; i < m_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      // Row i of B^{-1} A; any usable nonzero lets a structural column replace the artificial.
      int best = -1;
      double best_abs = 1e-9;
      for (int j = 0; j < n_; ++j) {
        if (is_basic_[j] >= 0) continue;
        double v = 0.0;
        for (int k = p_.col_begin(j); k < p_.col_end(j); ++k)
          v += binv_(i, p_.row_at(k)) * sign_[p_.row_at(k)] * p_.value_at(k);
        if (std::abs(v) > best_abs) {
          best_abs = std::abs(v);
          best = j;
        }
      }
      if (best < 0) continue;  // redundant row
      ftran(best, col);
      const double theta = xb_[i] / col[i];
      xb_.noalias() -= theta * col;
      xb_[i] = theta;
      pivot(best, i, col);
    }
    refactor();
  }

  Solution finish(Solution& sol, Status st) {
    refactor();
    sol.status = st;
    sol.iterations = iterations_;
    sol.x.assign(n_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (!is_artificial(basis_[i])) sol.x[basis_[i]] = std::max(0.0, xb_[i]);
    sol.objective = 0.0;
    for (int j = 0; j < n_; ++j) sol.objective += p_.cost(j) * sol.x[j];
    const Eigen::VectorXd y = duals();
    sol.duals.resize(m_);
    for (int i = 0; i < m_; ++i) sol.duals[i] = sign_[i] * y[i];
    return sol;
  }

  const Problem& p_;
  Options opt_;
  int m_, n_;
  std::vector<double> sign_;
  Eigen::VectorXd b_;
  std::vector<int> basis_;
  std::vector<int> is_basic_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  int phase_ = 1;
  int iterations_ = 0;
  int since_refactor_ = 0;
};

}  // namespace detail

inline Solution solve(const Problem& problem, const Options& options = {}) {
  if (problem.rows() == 0) {
    Solution s;
    s.status = Status::optimal;
    s.x.assign(problem.cols(), 0.0);
    for (int j = 0; j < problem.cols(); ++j)
      if (problem.cost(j) < 0.0) s.status = Status::unbounded;
    return s;
  }
  return detail::Simplex(problem, options).run();
}

}  // namespace zoloto::lp
