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

// Capacity regions.
//
// Chain networks: the static planning problem (SPP) maximizes the common slack
// delta of the service constraints
//     lambda_m(k) <= sum_j mu_(k,j) p_(k,j) - delta               for every k
//     b_j q_(k,j) / c_k - delta >= mu_(k,j) p_(k,j)
//                                  - mu_(k+1,j) p_(k+1,j)          for k not last
// under per-server budgets sum_k p <= 1 and sum_k q <= 1. A rate vector is
// supportable iff delta* >= 0.
//
// Supportability by the virtual queueing network is decided constructively: a
// flow-balanced (p, q) is turned into routing fractions (u, s, w) whose nominal
// queue rates r, r_c fit under the allocated service.
//
// DAG networks on a broadcast medium: the broadcast planning problem (BPP)
// minimizes the busiest server's activity load eta subject to
// e(lambda) + D z <= 0; a rate vector is supportable iff eta* <= 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsched/linprog.hpp"
#include "dsched/model.hpp"
#include "dsched/vqn_dag.hpp"

namespace dsched {

/// An LP the capacity layer relies on broke down numerically.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The flow-balanced allocation LP has no solution although delta* >= 0.
class BalanceInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SppResult {
  lp::Status status = lp::Status::numerical_failure;
  double delta_star = 0.0;
  Table p;  // [task][server]
  Table q;  // [task][server]; rows of terminal tasks stay zero
  bool in_region = false;
};

struct BoundaryPoint {
  std::vector<double> theta;  // unit sum
  double c_star = 0.0;
  double delta_star = 0.0;    // SPP optimum at c_star * theta (zero up to LP accuracy)
  bool with_comm = true;
};

struct AllocationVectors {
  Table u;                 // [job][server]
  Table s;                 // [task][server]; terminal rows unused (1)
  std::vector<Table> w;    // [task][from][to]; w[k][j][j] is always 0
  Table r;                 // nominal rate into processing queue (k, j)
  Table r_c;               // nominal rate into communication queue (k, j),c

  /// Fraction of type-k outputs processed at j whose child runs on l.
  double forward(std::size_t k, std::size_t j, std::size_t l) const {
    return l == j ? s[k][j] : (1.0 - s[k][j]) * w[k][j][l];
  }
};

struct BppResult {
  lp::Status status = lp::Status::numerical_failure;
  double eta_star = 0.0;
  std::vector<double> z;
  bool in_region = false;
};

namespace detail {

inline void require_chains(const Instance& instance, const char* op) {
  if (!instance.all_chains())
    throw std::invalid_argument(std::string(op) + " requires chain jobs (use solve_bpp for DAGs)");
}

inline void require_rates(const Instance& instance, std::span<const double> lambda) {
  if (lambda.size() != instance.job_count())
    throw std::invalid_argument("lambda has " + std::to_string(lambda.size()) +
                                " entries, expected " + std::to_string(instance.job_count()));
  for (double v : lambda)
    if (!(std::isfinite(v) && v >= 0.0))
      throw std::invalid_argument("arrival rates must be finite and nonnegative");
}

// Variable layout shared by the SPP family: p block, q block (non-terminal
// tasks only), then one trailing scalar (delta, c or the slack t).
struct SppLayout {
  std::size_t K = 0, J = 0;
  std::vector<std::size_t> q_row;  // per task, npos for terminals
  std::size_t q_rows = 0;
  bool with_comm = true;

  SppLayout(const Instance& instance, const DerivedSets& sets, bool comm)
      : K(instance.task_count()), J(instance.server_count()), with_comm(comm) {
    q_row.assign(K, static_cast<std::size_t>(-1));
    if (with_comm)
      for (std::size_t k = 0; k < K; ++k)
        if (!sets.is_terminal(k)) q_row[k] = q_rows++;
  }
  std::size_t p(std::size_t k, std::size_t j) const { return k * J + j; }
  std::size_t q(std::size_t k, std::size_t j) const { return K * J + q_row[k] * J + j; }
  std::size_t scalar() const { return K * J + q_rows * J; }
  std::size_t variables() const { return scalar() + 1; }
};

// Budget rows and the bandwidth rows with a coefficient `slack_coef` on the
// trailing scalar (1 for delta / t, 0 when the scalar is c).
inline void add_network_rows(lp::LinearProgram& lp, const Instance& instance,
                             const DerivedSets& sets, const SppLayout& lay, double slack_coef) {
  const auto& mu = instance.net.mu;
  for (std::size_t j = 0; j < lay.J; ++j) {
    lp::Terms budget;
    for (std::size_t k = 0; k < lay.K; ++k) budget.push_back({lay.p(k, j), 1.0});
    lp.add_le(budget, 1.0);
  }
  if (!lay.with_comm) return;
  for (std::size_t j = 0; j < lay.J; ++j) {
    lp::Terms budget;
    for (std::size_t k = 0; k < lay.K; ++k)
      if (!sets.is_terminal(k)) budget.push_back({lay.q(k, j), 1.0});
    if (!budget.empty()) lp.add_le(budget, 1.0);
  }
  for (std::size_t k = 0; k < lay.K; ++k) {
    if (sets.is_terminal(k)) continue;
    for (std::size_t j = 0; j < lay.J; ++j) {
      lp::Terms row{{lay.p(k, j), mu[k][j]},
                    {lay.p(k + 1, j), -mu[k + 1][j]},
                    {lay.q(k, j), -instance.net.bandwidth[j] / sets.out_size[k]}};
      if (slack_coef != 0.0) row.push_back({lay.scalar(), slack_coef});
      lp.add_le(row, 0.0);
    }
  }
}

inline void unpack_allocation(const lp::Solution& sol, const SppLayout& lay,
                              const DerivedSets& sets, SppResult& out) {
  out.p = make_table(lay.K, lay.J);
  out.q = make_table(lay.K, lay.J);
  for (std::size_t k = 0; k < lay.K; ++k)
    for (std::size_t j = 0; j < lay.J; ++j) {
      out.p[k][j] = sol.x[lay.p(k, j)];
      if (lay.with_comm && !sets.is_terminal(k)) out.q[k][j] = sol.x[lay.q(k, j)];
    }
}

inline SppResult solve_spp_impl(const Instance& instance, std::span<const double> lambda,
                                bool with_comm) {
  require_chains(instance, "SPP");
  require_rates(instance, lambda);
  const auto sets = derived_sets(instance);
  const SppLayout lay(instance, sets, with_comm);
  lp::LinearProgram lp(lay.variables());
  lp.set_free(lay.scalar());
  lp.objective[lay.scalar()] = 1.0;
  for (std::size_t k = 0; k < lay.K; ++k) {
    lp::Terms row;
    for (std::size_t j = 0; j < lay.J; ++j) row.push_back({lay.p(k, j), -instance.net.mu[k][j]});
    row.push_back({lay.scalar(), 1.0});
    lp.add_le(row, -lambda[sets.job_of[k]]);
  }
  add_network_rows(lp, instance, sets, lay, 1.0);
  const auto sol = lp::solve(lp);
  SppResult out;
  out.status = sol.status;
  if (!sol.optimal())
    throw NumericError(std::string("SPP solve failed: ") + lp::to_string(sol.status));
  out.delta_star = sol.x[lay.scalar()];
  out.in_region = out.delta_star >= -sign_tol;
  unpack_allocation(sol, lay, sets, out);
  return out;
}

}  // namespace detail

inline SppResult solve_spp(const Instance& instance, std::span<const double> lambda) {
  return detail::solve_spp_impl(instance, lambda, true);
}
inline SppResult solve_spp(const Instance& instance) { return solve_spp(instance, instance.lambda); }

/// SPP without the bandwidth rows and q variables (no communication cost).
inline SppResult solve_spp_nocomm(const Instance& instance, std::span<const double> lambda) {
  return detail::solve_spp_impl(instance, lambda, false);
}
inline SppResult solve_spp_nocomm(const Instance& instance) {
  return solve_spp_nocomm(instance, instance.lambda);
}

/// Largest c with c * theta in the region, from a single LP (maximize c with
/// the service rows at delta = 0).
inline BoundaryPoint boundary_point(const Instance& instance, std::span<const double> theta,
                                    bool with_comm = true) {
  detail::require_chains(instance, "boundary sweep");
  if (theta.size() != instance.job_count()) throw std::invalid_argument("direction size mismatch");
  double sum = 0.0;
  for (double v : theta) {
    if (!(std::isfinite(v) && v >= 0.0))
      throw std::invalid_argument("direction entries must be nonnegative");
    sum += v;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("direction must not be all zero");

  BoundaryPoint bp;
  bp.with_comm = with_comm;
  for (double v : theta) bp.theta.push_back(v / sum);

  const auto sets = derived_sets(instance);
  const detail::SppLayout lay(instance, sets, with_comm);
  lp::LinearProgram lp(lay.variables());
  lp.objective[lay.scalar()] = 1.0;
  for (std::size_t k = 0; k < lay.K; ++k) {
    lp::Terms row;
    for (std::size_t j = 0; j < lay.J; ++j) row.push_back({lay.p(k, j), -instance.net.mu[k][j]});
    row.push_back({lay.scalar(), bp.theta[sets.job_of[k]]});
    lp.add_le(row, 0.0);
  }
  detail::add_network_rows(lp, instance, sets, lay, 0.0);
  const auto sol = lp::solve(lp);
  if (!sol.optimal())
    throw NumericError(std::string("boundary LP failed: ") + lp::to_string(sol.status));
  bp.c_star = sol.x[lay.scalar()];
  std::vector<double> at(bp.theta.size());
  for (std::size_t m = 0; m < at.size(); ++m) at[m] = bp.c_star * bp.theta[m];
  bp.delta_star = detail::solve_spp_impl(instance, at, with_comm).delta_star;
  return bp;
}

inline std::vector<BoundaryPoint> sweep_boundary(const Instance& instance,
                                                 const std::vector<std::vector<double>>& directions,
                                                 bool with_comm = true) {
  std::vector<BoundaryPoint> out;
  out.reserve(directions.size());
  for (const auto& theta : directions) out.push_back(boundary_point(instance, theta, with_comm));
  return out;
}

/// `count` directions on the unit simplex. Two job types get evenly spaced
/// angles over the first quadrant (endpoints included); three or more get
/// seeded uniform draws from the simplex.
inline std::vector<std::vector<double>> simplex_directions(std::size_t jobs, std::size_t count,
                                                           std::uint64_t seed = 1) {
  std::vector<std::vector<double>> out;
  if (jobs == 0 || count == 0) return out;
  if (jobs == 1) {
    out.assign(count, {1.0});
    return out;
  }
  if (jobs == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double phi = count == 1 ? 0.0
                                    : (std::numbers::pi / 2.0) * static_cast<double>(i) /
                                          static_cast<double>(count - 1);
      double a = std::cos(phi), b = std::sin(phi);
      if (std::abs(a) < 1e-15) a = 0.0;
      if (std::abs(b) < 1e-15) b = 0.0;
      out.push_back({a / (a + b), b / (a + b)});
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(jobs);
    double s = 0.0;
    for (double& x : v) s += (x = expo(rng));
    for (double& x : v) x /= s;
    out.push_back(std::move(v));
  }
  return out;
}

/// SPP with every service row held at equality and delta fixed to 0; the
/// objective maximizes the smallest bandwidth slack t (capped at 1). The
/// returned `delta_star` holds t*.
inline SppResult balanced_spp(const Instance& instance, std::span<const double> lambda) {
  const auto check = solve_spp(instance, lambda);
  if (!check.in_region)
    throw std::invalid_argument("arrival rates lie outside the capacity region (delta* = " +
                                std::to_string(check.delta_star) + ")");
  const auto sets = derived_sets(instance);
  const detail::SppLayout lay(instance, sets, true);
  lp::LinearProgram lp(lay.variables());
  lp.lower[lay.scalar()] = -lp::inf;
  lp.upper[lay.scalar()] = 1.0;
  lp.objective[lay.scalar()] = 1.0;
  for (std::size_t k = 0; k < lay.K; ++k) {
    lp::Terms row;
    for (std::size_t j = 0; j < lay.J; ++j) row.push_back({lay.p(k, j), instance.net.mu[k][j]});
    lp.add_eq(row, lambda[sets.job_of[k]]);
  }
  detail::add_network_rows(lp, instance, sets, lay, 1.0);
  const auto sol = lp::solve(lp);
  if (sol.status == lp::Status::infeasible)
    throw BalanceInfeasible("no flow-balanced allocation exists although delta* >= 0");
  if (!sol.optimal())
    throw NumericError(std::string("balanced SPP failed: ") + lp::to_string(sol.status));
  SppResult out;
  out.status = sol.status;
  out.delta_star = sol.x[lay.scalar()];
  if (out.delta_star < -sign_tol)
    throw BalanceInfeasible("flow-balanced allocation violates the bandwidth rows (slack " +
                            std::to_string(out.delta_star) + ")");
  out.in_region = true;
  detail::unpack_allocation(sol, lay, sets, out);
  return out;
}
inline SppResult balanced_spp(const Instance& instance) {
  return balanced_spp(instance, instance.lambda);
}

/// Nominal queue rates implied by routing fractions: r at a root is
/// lambda * u, downstream r(k+1, j) = sum_l r(k, l) f(k, l -> j), and
/// r_c = r (1 - s).
inline void nominal_rates(const Instance& instance, std::span<const double> lambda,
                          AllocationVectors& alloc) {
  const auto sets = derived_sets(instance);
  const std::size_t K = instance.task_count(), J = instance.server_count();
  alloc.r = make_table(K, J);
  alloc.r_c = make_table(K, J);
  for (std::size_t m = 0; m < instance.job_count(); ++m) {
    const std::size_t root = sets.first_task[m];
    for (std::size_t j = 0; j < J; ++j) alloc.r[root][j] = lambda[m] * alloc.u[m][j];
    for (std::size_t k = root; !sets.is_terminal(k); ++k) {
      for (std::size_t j = 0; j < J; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < J; ++l) acc += alloc.r[k][l] * alloc.forward(k, l, j);
        alloc.r[k + 1][j] = acc;
        alloc.r_c[k][j] = alloc.r[k][j] * (1.0 - alloc.s[k][j]);
      }
    }
  }
}

/// Routing fractions (u, s, w) from a flow-balanced (p, q).
///
/// Servers are split per task into D_k, where the child gets more capacity
/// than the parent (mu p(k) < mu p(k+1)). A surplus server keeps the share
/// mu p(k+1) / mu p(k) local and ships the rest to D_k in proportion to each
/// deficit; a deficit server keeps everything. Degenerate divisions (zero
/// rate, empty D_k) fall back to uniform splits, which carry zero flow.
inline AllocationVectors construct_allocation(const Instance& instance,
                                              std::span<const double> lambda, const Table& p,
                                              const Table& q) {
  detail::require_chains(instance, "allocation constructor");
  detail::require_rates(instance, lambda);
  const auto sets = derived_sets(instance);
  const std::size_t K = instance.task_count(), J = instance.server_count();
  const std::size_t M = instance.job_count();
  const auto& mu = instance.net.mu;
  if (p.size() != K || q.size() != K) throw std::invalid_argument("allocation shape mismatch");
  for (std::size_t k = 0; k < K; ++k) {
    if (p[k].size() != J || q[k].size() != J)
      throw std::invalid_argument("allocation shape mismatch");
    double served = 0.0;
    for (std::size_t j = 0; j < J; ++j) served += mu[k][j] * p[k][j];
    const double nu = lambda[sets.job_of[k]];
    if (std::abs(served - nu) > 1e-7)
      throw std::invalid_argument("allocation is not flow-balanced at task " +
                                  std::to_string(k + 1) + " (served " + std::to_string(served) +
                                  ", offered " + std::to_string(nu) + ")");
  }

  AllocationVectors a;
  a.u = make_table(M, J);
  a.s = make_table(K, J, 1.0);
  a.w.assign(K, make_table(J, J));
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t root = sets.first_task[m];
    const double nu = lambda[m];
    for (std::size_t j = 0; j < J; ++j)
      a.u[m][j] = nu > 0.0 ? mu[root][j] * p[root][j] / nu : 1.0 / static_cast<double>(J);
  }
  auto uniform_row = [&](std::size_t k, std::size_t j) {
    for (std::size_t l = 0; l < J; ++l)
      a.w[k][j][l] = (l == j || J == 1) ? 0.0 : 1.0 / static_cast<double>(J - 1);
  };
  for (std::size_t k = 0; k < K; ++k) {
    if (sets.is_terminal(k)) continue;
    std::vector<double> here(J), next(J);
    std::vector<char> deficit(J, 0);
    double deficit_total = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      here[j] = mu[k][j] * p[k][j];
      next[j] = mu[k + 1][j] * p[k + 1][j];
      if (here[j] - next[j] < 0.0) {
        deficit[j] = 1;
        deficit_total += next[j] - here[j];
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      if (deficit[j] || here[j] <= 0.0) {
        a.s[k][j] = 1.0;
      } else {
        a.s[k][j] = next[j] / here[j];
      }
      if (deficit[j] || deficit_total <= 0.0) {
        uniform_row(k, j);
        continue;
      }
      for (std::size_t l = 0; l < J; ++l)
        a.w[k][j][l] = deficit[l] ? (next[l] - here[l]) / deficit_total : 0.0;
    }
  }
  nominal_rates(instance, lambda, a);
  return a;
}

struct ConstraintCheck {
  bool ok = true;
  double max_residual = 0.0;
  std::vector<std::string> violations;

  void require(bool cond, double residual, const std::string& what) {
    max_residual = std::max(max_residual, residual);
    if (!cond) {
      ok = false;
      violations.push_back(what);
    }
  }
};

/// Decides virtual-network supportability from a concrete tuple: the nominal
/// rates recomputed from (u, s, w) must fit under mu p and b q / c, with every
/// allocation vector feasible. Residuals use feas_tol.
inline ConstraintCheck verify_qnpp_membership(const Instance& instance,
                                              std::span<const double> lambda,
                                              const AllocationVectors& alloc, const Table& p,
                                              const Table& q) {
  detail::require_chains(instance, "QNPP check");
  detail::require_rates(instance, lambda);
  const auto sets = derived_sets(instance);
  const std::size_t K = instance.task_count(), J = instance.server_count();
  const std::size_t M = instance.job_count();
  ConstraintCheck c;
  auto at = [](std::size_t a, std::size_t b) {
    return "(" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ")";
  };
  if (alloc.u.size() != M || alloc.s.size() != K || alloc.w.size() != K || p.size() != K ||
      q.size() != K) {
    c.require(false, 0.0, "allocation shapes do not match the instance");
    return c;
  }

  for (std::size_t j = 0; j < J; ++j) {
    double sp = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      c.require(p[k][j] >= -feas_tol, -p[k][j], "p" + at(k, j) + " is negative");
      sp += p[k][j];
      if (!sets.is_terminal(k)) {
        c.require(q[k][j] >= -feas_tol, -q[k][j], "q" + at(k, j) + " is negative");
        sq += q[k][j];
      }
    }
    c.require(sp <= 1.0 + feas_tol, sp - 1.0,
              "processing budget of server " + std::to_string(j + 1) + " exceeds 1");
    c.require(sq <= 1.0 + feas_tol, sq - 1.0,
              "bandwidth budget of server " + std::to_string(j + 1) + " exceeds 1");
  }
  for (std::size_t m = 0; m < M; ++m) {
    double su = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      c.require(alloc.u[m][j] >= -feas_tol, -alloc.u[m][j], "u" + at(m, j) + " is negative");
      su += alloc.u[m][j];
    }
    c.require(std::abs(su - 1.0) <= feas_tol, std::abs(su - 1.0),
              "u row of job " + std::to_string(m + 1) + " sums to " + std::to_string(su));
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (sets.is_terminal(k)) continue;
    for (std::size_t j = 0; j < J; ++j) {
      const double s = alloc.s[k][j];
      c.require(s >= -feas_tol && s <= 1.0 + feas_tol, std::max(-s, s - 1.0),
                "s" + at(k, j) + " outside [0,1]");
      if (J == 1) continue;  // no other server to forward to
      double sw = 0.0;
      for (std::size_t l = 0; l < J; ++l) {
        if (l == j) continue;
        c.require(alloc.w[k][j][l] >= -feas_tol, -alloc.w[k][j][l],
                  "w" + at(k, j) + "->" + std::to_string(l + 1) + " is negative");
        sw += alloc.w[k][j][l];
      }
      c.require(std::abs(sw - 1.0) <= feas_tol, std::abs(sw - 1.0),
                "w row " + at(k, j) + " sums to " + std::to_string(sw));
    }
  }

  AllocationVectors rates = alloc;
  nominal_rates(instance, lambda, rates);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j) {
      const double cap = instance.net.mu[k][j] * p[k][j];
      c.require(rates.r[k][j] <= cap + feas_tol, rates.r[k][j] - cap,
                "r" + at(k, j) + " exceeds mu p");
      if (sets.is_terminal(k)) continue;
      const double bw = instance.net.bandwidth[j] * q[k][j] / sets.out_size[k];
      c.require(rates.r_c[k][j] <= bw + feas_tol, rates.r_c[k][j] - bw,
                "r_c" + at(k, j) + " exceeds b q / c");
    }
  return c;
}

/// SPP constraints at fixed delta for a given (p, q).
inline ConstraintCheck check_spp_allocation(const Instance& instance,
                                            std::span<const double> lambda, const Table& p,
                                            const Table& q, double delta = 0.0,
                                            double tol = feas_tol) {
  detail::require_chains(instance, "SPP check");
  detail::require_rates(instance, lambda);
  const auto sets = derived_sets(instance);
  const std::size_t K = instance.task_count(), J = instance.server_count();
  const auto& mu = instance.net.mu;
  ConstraintCheck c;
  for (std::size_t k = 0; k < K; ++k) {
    double served = 0.0;
    for (std::size_t j = 0; j < J; ++j) served += mu[k][j] * p[k][j];
    const double gap = lambda[sets.job_of[k]] - (served - delta);
    c.require(gap <= tol, gap, "service row of task " + std::to_string(k + 1));
    if (sets.is_terminal(k)) continue;
    for (std::size_t j = 0; j < J; ++j) {
      const double lhs = instance.net.bandwidth[j] * q[k][j] / sets.out_size[k] - delta;
      const double rhs = mu[k][j] * p[k][j] - mu[k + 1][j] * p[k + 1][j];
      c.require(rhs - lhs <= tol, rhs - lhs,
                "bandwidth row (" + std::to_string(k + 1) + "," + std::to_string(j + 1) + ")");
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    double sp = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      c.require(p[k][j] >= -tol, -p[k][j], "negative p");
      sp += p[k][j];
      if (!sets.is_terminal(k)) {
        c.require(q[k][j] >= -tol, -q[k][j], "negative q");
        sq += q[k][j];
      }
    }
    c.require(sp <= 1.0 + tol, sp - 1.0, "processing budget of server " + std::to_string(j + 1));
    c.require(sq <= 1.0 + tol, sq - 1.0, "bandwidth budget of server " + std::to_string(j + 1));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Broadcast planning for DAG networks

inline BppResult solve_bpp(const DagVqn& vqn, std::span<const double> lambda) {
  detail::require_rates(vqn.instance(), lambda);
  const std::size_t A = vqn.activities().size();
  const std::size_t eta = A;
  lp::LinearProgram lp(A + 1);
  lp.objective[eta] = -1.0;
  const auto e = vqn.arrival_vector(lambda);
  std::vector<lp::Terms> rows(vqn.size());
  for (std::size_t a = 0; a < A; ++a) {
    const auto& act = vqn.activities()[a];
    rows[act.source].push_back({a, -act.rate});
    if (act.target != Activity::departs) rows[act.target].push_back({a, act.rate});
  }
  for (std::size_t qi = 0; qi < vqn.size(); ++qi) lp.add_le(rows[qi], -e[qi]);
  for (std::size_t j = 0; j < vqn.servers(); ++j) {
    for (const auto* group : {&vqn.processing_at(j), &vqn.communication_at(j)}) {
      if (group->empty()) continue;
      lp::Terms row;
      for (std::size_t a : *group) row.push_back({a, 1.0});
      row.push_back({eta, -1.0});
      lp.add_le(row, 0.0);
    }
  }
  const auto sol = lp::solve(lp);
  if (!sol.optimal()) throw NumericError(std::string("BPP failed: ") + lp::to_string(sol.status));
  BppResult out;
  out.status = sol.status;
  out.eta_star = sol.x[eta];
  out.z.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(A));
  out.in_region = out.eta_star <= 1.0 + sign_tol;
  return out;
}

/// BPP for a DAG instance. Chain instances are refused unless `allow_chains`
/// is set, in which case they are treated as DAGs.
inline BppResult solve_bpp(const Instance& instance, std::span<const double> lambda,
                           bool allow_chains = false) {
  if (instance.all_chains() && !allow_chains)
    throw std::invalid_argument("BPP requires DAG jobs (pass allow_chains to treat chains as DAGs)");
  return solve_bpp(DagVqn(instance), lambda);
}

/// Chain job visiting the DAG's tasks in `order` (local ids). Throws if the
/// order is not a topological order of the job.
inline Job serialize_dag(const Job& job, const std::vector<std::size_t>& order) {
  const std::size_t n = job.size();
  if (order.size() != n) throw std::invalid_argument("order must list every task once");
  std::vector<std::size_t> pos(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] >= n || pos[order[i]] != n)
      throw std::invalid_argument("order must be a permutation of the job's tasks");
    pos[order[i]] = i;
  }
  for (const auto& [a, b] : job.edges)
    if (pos[a] >= pos[b])
      throw std::invalid_argument("order is not topological: edge (" + std::to_string(a + 1) +
                                  "," + std::to_string(b + 1) + ") runs backwards");
  std::vector<double> sizes(n);
  for (std::size_t i = 0; i < n; ++i) sizes[i] = job.out_size[order[i]];
  return Job::chain(std::move(sizes));
}

/// Serializes every job of a DAG instance, permuting the service-rate rows to
/// follow the new task numbering.
inline Instance serialize_instance(const Instance& instance,
                                   const std::vector<std::vector<std::size_t>>& orders) {
  if (orders.size() != instance.job_count())
    throw std::invalid_argument("one order per job is required");
  const auto sets = derived_sets(instance);
  Instance out;
  out.net.bandwidth = instance.net.bandwidth;
  out.lambda = instance.lambda;
  for (std::size_t m = 0; m < instance.job_count(); ++m) {
    out.jobs.push_back(serialize_dag(instance.jobs[m], orders[m]));
    for (std::size_t local : orders[m])
      out.net.mu.push_back(instance.net.mu[sets.first_task[m] + local]);
  }
  return out;
}

/// Some topological order per job (Kahn's algorithm, smallest id first).
inline std::vector<std::size_t> topological_order(const Job& job) {
  const std::size_t n = job.size();
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& e : job.edges) ++indeg[e.second];
  std::vector<std::size_t> order;
  std::vector<char> done(n, 0);
  while (order.size() < n) {
    std::size_t pick = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!done[v] && indeg[v] == 0) {
        pick = v;
        break;
      }
    if (pick == n) throw std::invalid_argument("job contains a cycle");
    done[pick] = 1;
    order.push_back(pick);
    for (const auto& e : job.edges)
      if (e.first == pick) --indeg[e.second];
  }
  return order;
}

// ---------------------------------------------------------------------------
// Static randomized policy planning

struct StaticPlan {
  double boundary_scale = 0.0;          // t* with t* lambda on the boundary
  std::vector<double> planned_lambda;   // rates the allocation was built for
  SppResult balanced;
  AllocationVectors alloc;
};

/// Builds a balanced allocation for a rate vector halfway between `lambda`
/// and the boundary along the same ray. Serving `lambda` with it leaves slack
/// on every queue that carries traffic.
inline StaticPlan plan_static_allocation(const Instance& instance, std::span<const double> lambda) {
  detail::require_rates(instance, lambda);
  double total = 0.0;
  for (double v : lambda) total += v;
  if (!(total > 0.0)) throw std::invalid_argument("static plan needs positive arrival rates");
  StaticPlan plan;
  const auto bp = boundary_point(instance, lambda, true);
  plan.boundary_scale = bp.c_star / total;
  const double factor = plan.boundary_scale > 1.0 ? 0.5 * (1.0 + plan.boundary_scale) : 1.0;
  for (double v : lambda) plan.planned_lambda.push_back(v * factor);
  plan.balanced = balanced_spp(instance, plan.planned_lambda);
  plan.alloc = construct_allocation(instance, plan.planned_lambda, plan.balanced.p,
                                    plan.balanced.q);
  return plan;
}

}  // namespace dsched
