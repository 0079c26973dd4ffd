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

// Fixtures and random instance generators shared by the tests.

#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "dsched/dsched.hpp"

namespace dsched::testing {

/// Two chain job types (2 and 3 tasks), two servers, unit output sizes.
inline Instance two_chains(std::vector<double> lambda = {0.5, 0.5}) {
  Instance inst;
  inst.jobs = {Job::chain({1, 1}), Job::chain({1, 1, 1})};
  inst.net.mu = {{4, 3}, {2, 4}, {2.5, 3.5}, {0.5, 4.5}, {3.5, 1}};
  inst.net.bandwidth = {1.5, 1};
  inst.lambda = std::move(lambda);
  return inst;
}

/// Diamond DAG 1->2, 1->3, 2->4, 3->4 (0-based here).
inline Job diamond_job() { return Job::dag({1, 1, 1, 1}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}); }

/// Diamond DAG on two servers with per-slot rates below one.
inline Instance diamond(double lambda = 0.05) {
  Instance inst;
  inst.jobs = {diamond_job()};
  inst.net.mu = {{0.4, 0.3}, {0.2, 0.4}, {0.25, 0.35}, {0.3, 0.2}};
  inst.net.bandwidth = {0.3, 0.2};
  inst.lambda = {lambda};
  return inst;
}

inline Instance single_task(double mu, double lambda) {
  Instance inst;
  inst.jobs = {Job::chain({1})};
  inst.net.mu = {{mu}};
  inst.net.bandwidth = {0.5};
  inst.lambda = {lambda};
  return inst;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random chain instance with total task count in [1, max_tasks] and
/// [min_servers, max_servers] servers. lambda is left at 0.5 per job.
inline Instance random_chains(std::mt19937_64& rng, std::size_t max_tasks, std::size_t max_servers,
                              std::size_t min_servers = 1) {
  Instance inst;
  const std::size_t K = pick(rng, 1, max_tasks);
  const std::size_t J = pick(rng, min_servers, max_servers);
  std::size_t left = K;
  while (left > 0) {
    const std::size_t len = pick(rng, 1, left);
    std::vector<double> sizes;
    for (std::size_t i = 0; i < len; ++i) sizes.push_back(uniform(rng, 0.5, 2.0));
    inst.jobs.push_back(Job::chain(sizes));
    left -= len;
  }
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> row;
    for (std::size_t j = 0; j < J; ++j) row.push_back(uniform(rng, 0.2, 5.0));
    inst.net.mu.push_back(row);
  }
  for (std::size_t j = 0; j < J; ++j) inst.net.bandwidth.push_back(uniform(rng, 0.2, 3.0));
  inst.lambda.assign(inst.jobs.size(), 0.5);
  return inst;
}

/// Random DAG on n nodes: edges only from lower to higher ids, each present
/// with probability `density`.
inline Job random_dag(std::mt19937_64& rng, std::size_t n, double density) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (uniform(rng, 0.0, 1.0) < density) edges.emplace_back(a, b);
  std::vector<double> sizes;
  for (std::size_t i = 0; i < n; ++i) sizes.push_back(uniform(rng, 0.5, 2.0));
  return Job::dag(sizes, edges);
}

/// Random DAG instance with per-slot rates below one.
inline Instance random_dag_instance(std::mt19937_64& rng, std::size_t max_nodes,
                                    std::size_t max_jobs, std::size_t max_servers) {
  Instance inst;
  const std::size_t M = pick(rng, 1, max_jobs);
  for (std::size_t m = 0; m < M; ++m)
    inst.jobs.push_back(random_dag(rng, pick(rng, 1, max_nodes), uniform(rng, 0.2, 0.7)));
  const std::size_t J = pick(rng, 1, max_servers);
  for (std::size_t k = 0; k < inst.task_count(); ++k) {
    std::vector<double> row;
    for (std::size_t j = 0; j < J; ++j) row.push_back(uniform(rng, 0.05, 0.9));
    inst.net.mu.push_back(row);
  }
  for (std::size_t j = 0; j < J; ++j) inst.net.bandwidth.push_back(uniform(rng, 0.05, 0.4));
  for (std::size_t m = 0; m < M; ++m) inst.lambda.push_back(uniform(rng, 0.01, 0.2));
  return inst;
}

/// A rate vector strictly inside the chain capacity region: a random
/// direction scaled to `fraction` of its boundary point.
inline std::vector<double> interior_rates(const Instance& inst, std::mt19937_64& rng,
                                          double fraction) {
  std::vector<double> theta;
  for (std::size_t m = 0; m < inst.job_count(); ++m) theta.push_back(uniform(rng, 0.05, 1.0));
  const auto bp = boundary_point(inst, theta);
  std::vector<double> lambda;
  for (double t : bp.theta) lambda.push_back(fraction * bp.c_star * t);
  return lambda;
}

}  // namespace dsched::testing
