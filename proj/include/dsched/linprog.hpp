/*
Copyright 2026 The dsched Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// Dense two-phase primal simplex for the small LPs behind the capacity
// analysis. Maximizes c'x subject to A_ub x <= b_ub, A_eq x = b_eq and
// per-variable bounds.
//
// Pivoting uses Dantzig's rule and switches to Bland's rule for the rest of a
// phase after a run of degenerate pivots, so the solver always terminates.
// The final basic solution is recomputed from the original data with a fresh
// factorization, which keeps residuals near machine precision.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsched/model.hpp"

namespace dsched::lp {

inline constexpr double inf = std::numeric_limits<double>::infinity();

using Terms = std::vector<std::pair<std::size_t, double>>;

struct LinearProgram {
  std::vector<double> objective;
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
  std::vector<std::vector<double>> a_eq;
  std::vector<double> b_eq;
  std::vector<double> lower;
  std::vector<double> upper;

  LinearProgram() = default;
  explicit LinearProgram(std::size_t n)
      : objective(n, 0.0), lower(n, 0.0), upper(n, inf) {}

  std::size_t variables() const { return objective.size(); }

  void add_le(const Terms& terms, double rhs) {
    a_ub.push_back(dense(terms));
    b_ub.push_back(rhs);
  }
  void add_ge(const Terms& terms, double rhs) {
    auto row = dense(terms);
    for (double& v : row) v = -v;
    a_ub.push_back(std::move(row));
    b_ub.push_back(-rhs);
  }
  void add_eq(const Terms& terms, double rhs) {
    a_eq.push_back(dense(terms));
    b_eq.push_back(rhs);
  }
  void set_free(std::size_t i) {
    lower.at(i) = -inf;
    upper.at(i) = inf;
  }

 private:
  std::vector<double> dense(const Terms& terms) const {
    std::vector<double> row(variables(), 0.0);
    for (const auto& [i, v] : terms) row.at(i) += v;
    return row;
  }
};

enum class Status { optimal, infeasible, unbounded, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct Solution {
  Status status = Status::numerical_failure;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t iterations = 0;
  double max_residual = 0.0;

  bool optimal() const { return status == Status::optimal; }
};

struct Options {
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-10;
  double phase_one_tol = 1e-9;
  std::size_t degenerate_run_before_bland = 50;
  std::size_t max_iterations = 0;  // 0: derived from problem size
};

/// Largest constraint or bound violation of `x` on `lp` (0 when feasible).
inline double max_violation(const LinearProgram& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < lp.variables(); ++i) {
    worst = std::max(worst, lp.lower[i] - x[i]);
    worst = std::max(worst, x[i] - lp.upper[i]);
  }
  for (std::size_t r = 0; r < lp.a_ub.size(); ++r) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < lp.variables(); ++i) lhs += lp.a_ub[r][i] * x[i];
    worst = std::max(worst, lhs - lp.b_ub[r]);
  }
  for (std::size_t r = 0; r < lp.a_eq.size(); ++r) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < lp.variables(); ++i) lhs += lp.a_eq[r][i] * x[i];
    worst = std::max(worst, std::abs(lhs - lp.b_eq[r]));
  }
  return worst;
}

namespace detail {

// Original variable i maps to offset[i] + sum(sign * y[col]) over its columns.
struct VariableMap {
  double offset = 0.0;
  std::vector<std::pair<std::size_t, double>> columns;
};

// Solves the square system B x = rhs by Gaussian elimination with partial
// pivoting. Returns false when B is numerically singular.
inline bool solve_square(std::vector<std::vector<double>> b, std::vector<double> rhs,
                         std::vector<double>& out) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(b[r][col]) > std::abs(b[piv][col])) piv = r;
    if (std::abs(b[piv][col]) < 1e-13) return false;
    std::swap(b[piv], b[col]);
    std::swap(rhs[piv], rhs[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = b[r][col] / b[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) b[r][c] -= f * b[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  out.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double acc = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= b[i][c] * out[c];
    out[i] = acc / b[i][i];
  }
  return true;
}

class Tableau {
 public:
  Tableau(std::vector<std::vector<double>> rows, std::vector<double> rhs,
          std::vector<std::size_t> basis, std::size_t columns, const Options& opt,
          std::size_t max_iterations)
      : a_(std::move(rows)),
        rhs_(std::move(rhs)),
        basis_(std::move(basis)),
        n_(columns),
        opt_(opt),
        max_iterations_(max_iterations) {}

  enum class Outcome { optimal, unbounded, stalled };

  // Maximizes cost'y over the current basis; columns with allowed[c] == 0 never
  // enter.
  Outcome optimize(const std::vector<double>& cost, const std::vector<char>& allowed) {
    const std::size_t m = a_.size();
    // reduced[c] = c_B B^-1 A_c - c_c; the tableau rows already hold B^-1 A.
    reduced_.assign(n_, 0.0);
    value_ = 0.0;
    for (std::size_t c = 0; c < n_; ++c) reduced_[c] = -cost[c];
    for (std::size_t r = 0; r < m; ++r) {
      double cb = cost[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t c = 0; c < n_; ++c) reduced_[c] += cb * a_[r][c];
      value_ += cb * rhs_[r];
    }
    bool bland = false;
    std::size_t degenerate_run = 0;
    while (true) {
      if (iterations_ >= max_iterations_) return Outcome::stalled;
      std::size_t enter = n_;
      double best = -opt_.optimality_tol;
      for (std::size_t c = 0; c < n_; ++c) {
        if (!allowed[c]) continue;
        if (bland) {
          if (reduced_[c] < -opt_.optimality_tol) {
            enter = c;
            break;
          }
        } else if (reduced_[c] < best) {
          best = reduced_[c];
          enter = c;
        }
      }
      if (enter == n_) return Outcome::optimal;

      std::size_t leave = m;
      double best_ratio = inf;
      for (std::size_t r = 0; r < m; ++r) {
        double coef = a_[r][enter];
        if (coef <= opt_.pivot_tol) continue;
        double ratio = rhs_[r] / coef;
        if (ratio < best_ratio - 1e-12 ||
            (std::abs(ratio - best_ratio) <= 1e-12 && leave < m && basis_[r] < basis_[leave])) {
          best_ratio = ratio;
          leave = r;
        }
      }
      if (leave == m) return Outcome::unbounded;

      if (best_ratio <= 1e-12) {
        if (++degenerate_run >= opt_.degenerate_run_before_bland) bland = true;
      } else {
        degenerate_run = 0;
      }
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    ++iterations_;
    const std::size_t m = a_.size();
    const double inv = 1.0 / a_[r][c];
    for (double& v : a_[r]) v *= inv;
    rhs_[r] *= inv;
    a_[r][c] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r) continue;
      const double f = a_[i][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n_; ++j) a_[i][j] -= f * a_[r][j];
      rhs_[i] -= f * rhs_[r];
      a_[i][c] = 0.0;
      if (rhs_[i] < 0.0 && rhs_[i] > -1e-12) rhs_[i] = 0.0;
    }
    if (!reduced_.empty()) {
      const double f = reduced_[c];
      if (f != 0.0) {
        for (std::size_t j = 0; j < n_; ++j) reduced_[j] -= f * a_[r][j];
        value_ -= f * rhs_[r];
        reduced_[c] = 0.0;
      }
    }
    basis_[r] = c;
  }

  void drop_row(std::size_t r) {
    a_.erase(a_.begin() + static_cast<std::ptrdiff_t>(r));
    rhs_.erase(rhs_.begin() + static_cast<std::ptrdiff_t>(r));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    kept_rows_.erase(kept_rows_.begin() + static_cast<std::ptrdiff_t>(r));
  }

  void init_row_ids() {
    kept_rows_.resize(a_.size());
    for (std::size_t i = 0; i < a_.size(); ++i) kept_rows_[i] = i;
  }

  const std::vector<std::vector<double>>& rows() const { return a_; }
  const std::vector<double>& rhs() const { return rhs_; }
  const std::vector<std::size_t>& basis() const { return basis_; }
  const std::vector<std::size_t>& kept_rows() const { return kept_rows_; }
  std::size_t iterations() const { return iterations_; }
  double value() const { return value_; }

 private:
  std::vector<std::vector<double>> a_;
  std::vector<double> rhs_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> kept_rows_;
  std::vector<double> reduced_;
  double value_ = 0.0;
  std::size_t n_;
  Options opt_;
  std::size_t max_iterations_;
  std::size_t iterations_ = 0;
};

}  // namespace detail

inline Solution solve(const LinearProgram& lp, const Options& opt = {}) {
  const std::size_t n = lp.variables();
  if (lp.lower.size() != n || lp.upper.size() != n)
    throw std::invalid_argument("LP bound vectors do not match the objective length");
  if (lp.a_ub.size() != lp.b_ub.size() || lp.a_eq.size() != lp.b_eq.size())
    throw std::invalid_argument("LP constraint rows and right-hand sides differ in count");
  for (const auto& row : lp.a_ub)
    if (row.size() != n) throw std::invalid_argument("LP inequality row has wrong length");
  for (const auto& row : lp.a_eq)
    if (row.size() != n) throw std::invalid_argument("LP equality row has wrong length");
  for (std::size_t i = 0; i < n; ++i)
    if (lp.lower[i] > lp.upper[i]) {
      Solution s;
      s.status = Status::infeasible;
      return s;
    }

  // Map every original variable onto nonnegative structural columns.
  std::vector<detail::VariableMap> vars(n);
  std::size_t ncols = 0;
  struct UpperRow {
    std::size_t column;
    double bound;
  };
  std::vector<UpperRow> upper_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = lp.lower[i], hi = lp.upper[i];
    if (std::isfinite(lo)) {
      vars[i].offset = lo;
      vars[i].columns.push_back({ncols, 1.0});
      if (std::isfinite(hi)) upper_rows.push_back({ncols, hi - lo});
      ++ncols;
    } else if (std::isfinite(hi)) {
      vars[i].offset = hi;
      vars[i].columns.push_back({ncols++, -1.0});
    } else {
      vars[i].columns.push_back({ncols++, 1.0});
      vars[i].columns.push_back({ncols++, -1.0});
    }
  }
  const std::size_t structural = ncols;

  // Rows in "<=" form (with slack) and "=" form, expressed over y.
  struct Row {
    std::vector<double> coef;
    double rhs;
    bool equality;
  };
  std::vector<Row> rows;
  auto translate = [&](const std::vector<double>& a, double b, bool eq) {
    Row row{std::vector<double>(structural, 0.0), b, eq};
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] == 0.0) continue;
      row.rhs -= a[i] * vars[i].offset;
      for (const auto& [col, sign] : vars[i].columns) row.coef[col] += a[i] * sign;
    }
    rows.push_back(std::move(row));
  };
  for (std::size_t r = 0; r < lp.a_ub.size(); ++r) translate(lp.a_ub[r], lp.b_ub[r], false);
  for (std::size_t r = 0; r < lp.a_eq.size(); ++r) translate(lp.a_eq[r], lp.b_eq[r], true);
  for (const auto& ur : upper_rows) {
    Row row{std::vector<double>(structural, 0.0), ur.bound, false};
    row.coef[ur.column] = 1.0;
    rows.push_back(std::move(row));
  }

  const std::size_t m = rows.size();
  std::size_t slack_count = 0;
  for (const auto& row : rows)
    if (!row.equality) ++slack_count;

  // Column layout: structural | slacks | artificials.
  std::vector<std::vector<double>> a(m);
  std::vector<double> rhs(m);
  std::vector<std::size_t> basis(m);
  std::vector<std::size_t> needs_artificial;
  std::size_t slack_col = structural;
  std::vector<std::vector<double>> original(m);  // sign-normalized, without artificials
  std::vector<double> original_rhs(m);
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<double> row(structural + slack_count, 0.0);
    std::copy(rows[r].coef.begin(), rows[r].coef.end(), row.begin());
    double b = rows[r].rhs;
    std::size_t slack = structural + slack_count;  // none
    if (!rows[r].equality) {
      slack = slack_col++;
      row[slack] = 1.0;
    }
    if (b < 0.0) {
      for (double& v : row) v = -v;
      b = -b;
    }
    if (slack < structural + slack_count && row[slack] > 0.0) {
      basis[r] = slack;
    } else {
      needs_artificial.push_back(r);
    }
    original[r] = row;
    original_rhs[r] = b;
    a[r] = std::move(row);
    rhs[r] = b;
  }
  const std::size_t base_cols = structural + slack_count;
  const std::size_t total_cols = base_cols + needs_artificial.size();
  for (auto& row : a) row.resize(total_cols, 0.0);
  for (std::size_t i = 0; i < needs_artificial.size(); ++i) {
    a[needs_artificial[i]][base_cols + i] = 1.0;
    basis[needs_artificial[i]] = base_cols + i;
  }

  const std::size_t cap =
      opt.max_iterations ? opt.max_iterations : 50 * (m + total_cols) + 1000;
  detail::Tableau tab(std::move(a), std::move(rhs), std::move(basis), total_cols, opt, cap);
  tab.init_row_ids();

  Solution sol;
  double rhs_scale = 1.0;
  for (const auto& row : rows) rhs_scale = std::max(rhs_scale, std::abs(row.rhs));

  // Phase one: maximize -sum(artificials).
  if (!needs_artificial.empty()) {
    std::vector<double> cost(total_cols, 0.0);
    for (std::size_t c = base_cols; c < total_cols; ++c) cost[c] = -1.0;
    std::vector<char> allowed(total_cols, 1);
    auto outcome = tab.optimize(cost, allowed);
    sol.iterations = tab.iterations();
    if (outcome == detail::Tableau::Outcome::stalled) return sol;
    if (-tab.value() > opt.phase_one_tol * rhs_scale) {
      sol.status = Status::infeasible;
      return sol;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    for (std::size_t r = tab.rows().size(); r-- > 0;) {
      if (tab.basis()[r] < base_cols) continue;
      std::size_t enter = base_cols;
      double best = opt.pivot_tol;
      for (std::size_t c = 0; c < base_cols; ++c) {
        double v = std::abs(tab.rows()[r][c]);
        if (v > best) {
          best = v;
          enter = c;
        }
      }
      if (enter < base_cols) {
        tab.pivot(r, enter);
      } else {
        tab.drop_row(r);
      }
    }
  }

  // Phase two over the structural and slack columns.
  std::vector<double> cost(total_cols, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [col, sign] : vars[i].columns) cost[col] += lp.objective[i] * sign;
  std::vector<char> allowed(total_cols, 0);
  for (std::size_t c = 0; c < base_cols; ++c) allowed[c] = 1;
  auto outcome = tab.optimize(cost, allowed);
  sol.iterations = tab.iterations();
  if (outcome == detail::Tableau::Outcome::stalled) return sol;
  if (outcome == detail::Tableau::Outcome::unbounded) {
    sol.status = Status::unbounded;
    return sol;
  }

  // Recompute the basic solution from the original rows.
  const auto& kept = tab.kept_rows();
  const auto& bas = tab.basis();
  const std::size_t mk = kept.size();
  std::vector<double> y(total_cols, 0.0);
  std::vector<std::vector<double>> bmat(mk, std::vector<double>(mk, 0.0));
  std::vector<double> brhs(mk);
  for (std::size_t i = 0; i < mk; ++i) {
    const std::size_t r = kept[i];
    brhs[i] = original_rhs[r];
    for (std::size_t j = 0; j < mk; ++j) {
      std::size_t col = bas[j];
      bmat[i][j] = col < base_cols ? original[r][col] : 0.0;
    }
  }
  std::vector<double> xb;
  if (detail::solve_square(bmat, brhs, xb)) {
    for (std::size_t j = 0; j < mk; ++j) y[bas[j]] = xb[j];
  } else {
    for (std::size_t j = 0; j < mk; ++j) y[bas[j]] = tab.rhs()[j];
  }

  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = vars[i].offset;
    for (const auto& [col, sign] : vars[i].columns) v += sign * std::max(0.0, y[col]);
    sol.x[i] = v;
  }
  sol.objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) sol.objective += lp.objective[i] * sol.x[i];
  sol.max_residual = max_violation(lp, sol.x);
  sol.status = sol.max_residual <= feas_tol ? Status::optimal : Status::numerical_failure;
  return sol;
}

}  // namespace dsched::lp
