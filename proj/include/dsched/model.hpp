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

// Problem instances: job specs (chains or DAGs), server rates, bandwidths and
// arrival rates. All task indices are 0-based and global: job 0's tasks come
// first, then job 1's, and so on.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dsched {

/// Primal feasibility tolerance shared by the LP layer and every checker.
inline constexpr double feas_tol = 1e-8;
/// One-sided slack used for region-membership decisions on delta* / eta*.
inline constexpr double sign_tol = 1e-7;

using Table = std::vector<std::vector<double>>;

inline Table make_table(std::size_t rows, std::size_t cols, double fill = 0.0) {
  return Table(rows, std::vector<double>(cols, fill));
}

enum class JobKind { chain, dag };

/// One job type. Tasks are numbered locally 0..size()-1; `edges` hold local
/// (parent, child) pairs. Chains carry the implied k -> k+1 edges explicitly so
/// both kinds can be treated as DAGs.
struct Job {
  JobKind kind = JobKind::chain;
  std::vector<double> out_size;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t size() const { return out_size.size(); }
  bool is_chain() const { return kind == JobKind::chain; }

  static Job chain(std::vector<double> out_size) {
    Job job;
    job.kind = JobKind::chain;
    job.out_size = std::move(out_size);
    for (std::size_t k = 0; k + 1 < job.out_size.size(); ++k) job.edges.emplace_back(k, k + 1);
    return job;
  }

  static Job dag(std::vector<double> out_size,
                 std::vector<std::pair<std::size_t, std::size_t>> edges) {
    Job job;
    job.kind = JobKind::dag;
    job.out_size = std::move(out_size);
    job.edges = std::move(edges);
    return job;
  }
};

struct Network {
  Table mu;                        // [task][server], tasks per slot
  std::vector<double> bandwidth;   // [server], bits per slot

  std::size_t servers() const { return bandwidth.size(); }
};

struct Instance {
  std::vector<Job> jobs;
  Network net;
  std::vector<double> lambda;

  std::size_t job_count() const { return jobs.size(); }
  std::size_t server_count() const { return net.servers(); }
  std::size_t task_count() const {
    std::size_t total = 0;
    for (const auto& job : jobs) total += job.size();
    return total;
  }
  bool all_chains() const {
    return std::all_of(jobs.begin(), jobs.end(), [](const Job& j) { return j.is_chain(); });
  }
};

/// Index bookkeeping derived from an instance: job offsets, roots, terminals
/// and per-task parent/child lists (global indices).
struct DerivedSets {
  std::vector<std::size_t> first_task;   // per job
  std::vector<std::size_t> job_of;       // per task
  std::vector<double> out_size;          // per task
  std::vector<std::size_t> roots;        // first task of every chain
  std::vector<std::size_t> terminals;    // last task of every chain
  std::vector<std::vector<std::size_t>> parents;
  std::vector<std::vector<std::size_t>> children;

  std::size_t local(std::size_t k) const { return k - first_task[job_of[k]]; }
  bool is_root(std::size_t k) const {
    return std::find(roots.begin(), roots.end(), k) != roots.end();
  }
  bool is_terminal(std::size_t k) const {
    return std::find(terminals.begin(), terminals.end(), k) != terminals.end();
  }
};

/// Roots and terminals follow the chain index formula; for DAG jobs they are
/// the source and sink nodes respectively.
inline DerivedSets derived_sets(const Instance& instance) {
  DerivedSets sets;
  std::size_t offset = 0;
  for (std::size_t m = 0; m < instance.jobs.size(); ++m) {
    const Job& job = instance.jobs[m];
    sets.first_task.push_back(offset);
    for (std::size_t i = 0; i < job.size(); ++i) {
      sets.job_of.push_back(m);
      sets.out_size.push_back(job.out_size[i]);
    }
    offset += job.size();
  }
  sets.parents.assign(offset, {});
  sets.children.assign(offset, {});
  for (std::size_t m = 0; m < instance.jobs.size(); ++m) {
    const Job& job = instance.jobs[m];
    const std::size_t base = sets.first_task[m];
    for (const auto& [a, b] : job.edges) {
      if (a >= job.size() || b >= job.size()) continue;
      sets.children[base + a].push_back(base + b);
      sets.parents[base + b].push_back(base + a);
    }
    for (std::size_t i = 0; i < job.size(); ++i) {
      std::sort(sets.parents[base + i].begin(), sets.parents[base + i].end());
      std::sort(sets.children[base + i].begin(), sets.children[base + i].end());
    }
    if (job.size() == 0) continue;
    if (job.is_chain()) {
      sets.roots.push_back(base);
      sets.terminals.push_back(base + job.size() - 1);
    } else {
      for (std::size_t i = 0; i < job.size(); ++i) {
        if (sets.parents[base + i].empty()) sets.roots.push_back(base + i);
        if (sets.children[base + i].empty()) sets.terminals.push_back(base + i);
      }
    }
  }
  return sets;
}

/// Local descendant sets of a job: result[i] holds every local task reachable
/// from i along edges (i itself excluded). Requires an acyclic job.
inline std::vector<std::vector<std::size_t>> descendants(const Job& job) {
  const std::size_t n = job.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : job.edges)
    if (a < n && b < n) adj[a].push_back(b);
  std::vector<std::vector<std::size_t>> result(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack(adj[s].begin(), adj[s].end());
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      if (seen[v]) continue;
      seen[v] = 1;
      for (std::size_t w : adj[v]) stack.push_back(w);
    }
    for (std::size_t v = 0; v < n; ++v)
      if (seen[v]) result[s].push_back(v);
  }
  return result;
}

inline bool is_acyclic(const Job& job) {
  const std::size_t n = job.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : job.edges) {
    if (a >= n || b >= n) continue;
    adj[a].push_back(b);
    ++indeg[b];
  }
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::size_t visited = 0;
  while (!ready.empty()) {
    std::size_t v = ready.back();
    ready.pop_back();
    ++visited;
    for (std::size_t w : adj[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  return visited == n;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationIssue {
  enum class Scope {
    structure,   // breaks every use of the instance
    simulation,  // fine for capacity analysis, not for the slot simulator
  };
  Scope scope;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool valid_for_capacity() const {
    return std::none_of(issues.begin(), issues.end(), [](const ValidationIssue& i) {
      return i.scope == ValidationIssue::Scope::structure;
    });
  }
  bool valid_for_simulation() const { return issues.empty(); }
  bool empty() const { return issues.empty(); }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& issue : issues)
      os << (issue.scope == ValidationIssue::Scope::structure ? "[structure] " : "[simulation] ")
         << issue.message << '\n';
    return os.str();
  }
};

inline ValidationReport validate(const Instance& instance) {
  ValidationReport report;
  auto structural = [&](std::string msg) {
    report.issues.push_back({ValidationIssue::Scope::structure, std::move(msg)});
  };
  auto sim_only = [&](std::string msg) {
    report.issues.push_back({ValidationIssue::Scope::simulation, std::move(msg)});
  };
  auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };

  if (instance.jobs.empty()) structural("instance has no jobs");
  const bool any_chain = std::any_of(instance.jobs.begin(), instance.jobs.end(),
                                     [](const Job& j) { return j.is_chain(); });
  const bool any_dag = std::any_of(instance.jobs.begin(), instance.jobs.end(),
                                   [](const Job& j) { return !j.is_chain(); });
  if (any_chain && any_dag) structural("instance mixes chain and dag jobs");

  for (std::size_t m = 0; m < instance.jobs.size(); ++m) {
    const Job& job = instance.jobs[m];
    const std::string tag = "job " + std::to_string(m + 1) + ": ";
    if (job.size() == 0) structural(tag + "has no tasks");
    for (std::size_t i = 0; i < job.size(); ++i)
      if (!finite_positive(job.out_size[i]))
        structural(tag + "task " + std::to_string(i + 1) + " has non-positive output size");
    bool edges_in_range = true;
    for (const auto& [a, b] : job.edges) {
      if (a >= job.size() || b >= job.size()) {
        structural(tag + "edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                   ") out of range");
        edges_in_range = false;
      } else if (a == b) {
        structural(tag + "self-loop on task " + std::to_string(a + 1));
      }
    }
    if (edges_in_range && !is_acyclic(job)) structural(tag + "graph contains a cycle");
    if (job.is_chain()) {
      auto expected = Job::chain(job.out_size).edges;
      auto actual = job.edges;
      std::sort(actual.begin(), actual.end());
      if (actual != expected) structural(tag + "chain edges must be exactly k -> k+1");
    }
  }

  const std::size_t K = instance.task_count();
  const std::size_t J = instance.server_count();
  if (J == 0) structural("network has no servers");
  if (instance.net.mu.size() != K) {
    structural("mu has " + std::to_string(instance.net.mu.size()) + " rows, expected " +
               std::to_string(K));
  }
  bool mu_ok = instance.net.mu.size() == K;
  for (std::size_t k = 0; k < instance.net.mu.size(); ++k) {
    if (instance.net.mu[k].size() != J) {
      structural("mu row " + std::to_string(k + 1) + " has wrong length");
      mu_ok = false;
      continue;
    }
    for (double v : instance.net.mu[k])
      if (!finite_positive(v)) {
        structural("mu row " + std::to_string(k + 1) + " has a non-positive rate");
        mu_ok = false;
        break;
      }
  }
  bool b_ok = true;
  for (double v : instance.net.bandwidth)
    if (!finite_positive(v)) {
      structural("bandwidth entries must be positive");
      b_ok = false;
      break;
    }

  if (instance.lambda.size() != instance.jobs.size()) {
    structural("lambda has " + std::to_string(instance.lambda.size()) + " entries, expected " +
               std::to_string(instance.jobs.size()));
  }
  for (std::size_t m = 0; m < instance.lambda.size(); ++m) {
    double v = instance.lambda[m];
    if (!(std::isfinite(v) && v > 0.0 && v < 1.0))
      structural("lambda " + std::to_string(m + 1) + " must lie in (0,1)");
  }

  if (!report.valid_for_capacity()) return report;

  // Simulation preconditions: rates are per-slot probabilities.
  if (mu_ok) {
    double max_mu = 0.0;
    for (const auto& row : instance.net.mu)
      for (double v : row) max_mu = std::max(max_mu, v);
    if (max_mu > 1.0)
      sim_only("service rates exceed 1 (max " + std::to_string(max_mu) +
               "); rescale for simulation");
  }
  if (b_ok) {
    const auto sets = derived_sets(instance);
    double max_ratio = 0.0;
    for (double b : instance.net.bandwidth)
      for (double c : sets.out_size) max_ratio = std::max(max_ratio, b / c);
    if (max_ratio >= 1.0)
      sim_only("b_j / c_k must stay below 1 (max " + std::to_string(max_ratio) +
               "); rescale for simulation");
  }
  if (J == 1 && any_chain) {
    for (const auto& job : instance.jobs)
      if (job.size() > 1) {
        sim_only("chain with more than one task on a single server: communication queues "
                 "have no destination");
        break;
      }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Clock rescaling

struct RescaleReport {
  double factor = 1.0;
  Instance scaled;
};

/// Speeds up the slot clock so every per-slot probability sits at or below
/// `headroom`. Service rates, bandwidths and arrival rates are scaled together,
/// which leaves region membership unchanged.
inline RescaleReport rescale_for_simulation(const Instance& instance, double headroom) {
  if (!(headroom > 0.0 && headroom < 1.0))
    throw std::invalid_argument("headroom must lie in (0,1)");
  const auto sets = derived_sets(instance);
  double peak = 0.0;
  for (const auto& row : instance.net.mu)
    for (double v : row) peak = std::max(peak, v);
  for (double b : instance.net.bandwidth)
    for (double c : sets.out_size) peak = std::max(peak, b / c);
  if (!(peak > 0.0)) throw std::invalid_argument("instance has no positive rates");

  RescaleReport report;
  report.factor = std::min(1.0, headroom / peak);
  report.scaled = instance;
  if (report.factor == 1.0) return report;
  for (auto& row : report.scaled.net.mu)
    for (double& v : row) v *= report.factor;
  for (double& b : report.scaled.net.bandwidth) b *= report.factor;
  for (double& l : report.scaled.lambda) l *= report.factor;
  return report;
}

}  // namespace dsched
