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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <iostream>

#include "support.hpp"

using namespace dsched;
using namespace dsched::testing;

namespace {

Instance scaled_two_chains(double fraction) {
  const auto base = rescale_for_simulation(two_chains(), 0.9).scaled;
  const auto bp = boundary_point(base, std::vector<double>{0.5, 0.5});
  Instance inst = base;
  for (std::size_t m = 0; m < 2; ++m) inst.lambda[m] = fraction * bp.c_star * bp.theta[m];
  return inst;
}

SimConfig config(std::int64_t horizon, std::uint64_t seed) {
  SimConfig c;
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

// Two-sample Kolmogorov-Smirnov test, asymptotic p-value.
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST(Sim, LightTrafficDrains) {
  Instance inst = rescale_for_simulation(two_chains(), 0.9).scaled;
  inst.lambda = {0.01, 0.01};
  const auto t = run_chain(inst, config(10'000, 3));
  EXPECT_LT(t.qn_over_n(), 0.01);
}

TEST(Sim, SingleQueueDriftMatchesTheory) {
  const auto t = run_chain(single_task(0.5, 0.8), config(100'000, 7));
  const auto v = assess_stability(t);
  EXPECT_NEAR(v.slope, 0.3, 0.05);
  EXPECT_EQ(v.verdict, Verdict::unstable_evidence);
}

TEST(Sim, DeparturesNeverExceedArrivals) {
  const auto t = run_chain(single_task(0.5, 0.001), config(1'000, 1));
  EXPECT_LE(t.departures.back(), t.arrivals.back());
}

TEST(Sim, ConservationEverySlot) {
  auto cfg = config(20'000, 9);
  cfg.check_conservation = true;
  EXPECT_NO_THROW(run_chain(scaled_two_chains(0.9), cfg));
  EXPECT_NO_THROW(run_dag(diamond(0.05), cfg));
  const auto t = run_chain(scaled_two_chains(1.2), cfg);
  for (std::size_t n = 0; n < t.total_q.size(); ++n)
    ASSERT_EQ(t.total_q[n] + t.total_qc[n], t.arrivals[n] - t.departures[n]);
}

TEST(Sim, SameSeedSameTrace) {
  const auto inst = scaled_two_chains(0.9);
  const auto a = run_chain(inst, config(20'000, 11));
  const auto b = run_chain(inst, config(20'000, 11));
  EXPECT_EQ(a.total_q, b.total_q);
  EXPECT_EQ(a.total_qc, b.total_qc);
  EXPECT_EQ(a.departures, b.departures);
  EXPECT_EQ(a.mean_len, b.mean_len);
  const auto c = run_chain(inst, config(20'000, 12));
  EXPECT_NE(a.total_q, c.total_q);
}

TEST(Sim, RejectsUnscaledInstances) {
  EXPECT_THROW(run_chain(two_chains(), config(10, 1)), std::invalid_argument);
  EXPECT_THROW(run_chain(diamond(), config(10, 1)), std::invalid_argument);
  SimConfig bad = config(0, 1);
  EXPECT_THROW(run_chain(single_task(0.5, 0.3), bad), std::invalid_argument);
  bad = config(10, 1);
  bad.warmup = 0.95;
  EXPECT_THROW(run_chain(single_task(0.5, 0.3), bad), std::invalid_argument);
}

TEST(Sim, DepartureRatesTrackArrivalRates) {
  const auto inst = scaled_two_chains(0.6);
  const std::int64_t N = 200'000;
  const auto t = run_chain(inst, config(N, 13));
  for (std::size_t m = 0; m < 2; ++m) {
    const double lam = inst.lambda[m];
    const double se = std::sqrt(lam * (1 - lam) / static_cast<double>(N));
    EXPECT_NEAR(static_cast<double>(t.departures_by_type[m]) / static_cast<double>(N), lam, 3 * se);
  }
}

TEST(Sim, OraclePolicyStabilizesSmallChain) {
  auto cfg = config(20'000, 17);
  cfg.policy = PolicyKind::brute_force;
  cfg.tie_break = TieBreak::lowest_index;
  Instance big;
  big.jobs = {Job::chain(std::vector<double>(6, 1.0))};
  big.net.mu = make_table(6, 4, 0.5);
  big.net.bandwidth.assign(4, 0.5);
  big.lambda = {0.1};
  EXPECT_THROW(run_chain(big, cfg), std::length_error);  // decision space above the guard

  Instance small;
  small.jobs = {Job::chain({1, 1})};
  small.net.mu = {{0.5, 0.3}, {0.4, 0.6}};
  small.net.bandwidth = {0.3, 0.4};
  small.lambda = {0.2};
  const auto v = assess_stability(run_chain(small, cfg));
  EXPECT_EQ(v.verdict, Verdict::stable_evidence);
}

TEST(Sim, StaticAllocationStabilizesInteriorRates) {
  const auto inst = scaled_two_chains(0.7);
  const auto plan = plan_static_allocation(inst, inst.lambda);
  const auto t =
      run_static_allocation(inst, plan.alloc, plan.balanced.p, plan.balanced.q, config(200'000, 19));
  EXPECT_EQ(assess_stability(t).verdict, Verdict::stable_evidence);

  const auto mw = run_chain(inst, config(200'000, 19));
  double static_mean = 0.0, mw_mean = 0.0;
  for (double v : t.mean_len) static_mean += v;
  for (double v : mw.mean_len) mw_mean += v;
  std::cout << "[info] mean total queue: max-weight " << mw_mean << ", static " << static_mean
            << '\n';
}

TEST(Sim, ZeroAllocationIsUnstable) {
  const auto inst = scaled_two_chains(0.7);
  const auto plan = plan_static_allocation(inst, inst.lambda);
  const Table zero = make_table(inst.task_count(), inst.server_count());
  const auto t = run_static_allocation(inst, plan.alloc, zero, zero, config(50'000, 23));
  EXPECT_EQ(assess_stability(t).verdict, Verdict::unstable_evidence);
}

TEST(Sim, DiamondStableInsideUnstableOutside) {
  const auto inst = diamond();
  const double eta_unit = solve_bpp(inst, std::vector<double>{1.0}).eta_star;
  Instance inside = inst, outside = inst;
  inside.lambda = {0.5 / eta_unit};
  outside.lambda = {1.5 / eta_unit};
  const auto a = assess_stability(run_dag(inside, config(200'000, 29)));
  EXPECT_LT(a.qn_over_n, 0.02);
  const auto b = assess_stability(run_dag(outside, config(100'000, 29)));
  EXPECT_GT(b.slope, 0.0);
  EXPECT_EQ(b.verdict, Verdict::unstable_evidence);
}

TEST(Sim, SingleNodeDagBehavesLikeSingleTaskChain) {
  Instance chain = single_task(0.5, 0.3);
  Instance dag = chain;
  dag.jobs = {Job::dag({1}, {})};
  std::vector<double> a, b;
  for (std::uint64_t r = 0; r < 20; ++r) {
    a.push_back(static_cast<double>(run_chain(chain, config(2'000, 100 + r)).departures.back()));
    b.push_back(static_cast<double>(run_dag(dag, config(2'000, 900 + r)).departures.back()));
  }
  EXPECT_GT(ks_pvalue(a, b), 0.01);
}

TEST(Sim, ReplicationsUseConsecutiveSeeds) {
  auto cfg = config(1'000, 40);
  cfg.replications = 3;
  const auto traces = replicate(cfg, [&](const SimConfig& c) {
    return run_chain(single_task(0.5, 0.3), c);
  });
  ASSERT_EQ(traces.size(), 3u);
  EXPECT_EQ(traces[0].seed, 40u);
  EXPECT_EQ(traces[2].seed, 42u);
}

TEST(Assess, ZeroTraceIsStable) {
  SimTrace t;
  t.horizon = 1000;
  t.lambda_sum = 0.5;
  t.total_q.assign(1000, 0);
  t.total_qc.assign(1000, 0);
  const auto v = assess_stability(t);
  EXPECT_EQ(v.slope, 0.0);
  EXPECT_EQ(v.verdict, Verdict::stable_evidence);
}

TEST(Assess, BorderlineSlopeIsInconclusive) {
  SimTrace t;
  t.horizon = 1000;
  t.lambda_sum = 1.0;
  for (int n = 0; n < 1000; ++n) {
    t.total_q.push_back(n / 50);  // slope 0.02: between the two thresholds
    t.total_qc.push_back(0);
  }
  const auto v = assess_stability(t);
  EXPECT_NEAR(v.slope, 0.02, 1e-3);
  EXPECT_EQ(v.verdict, Verdict::inconclusive);
}

TEST(Assess, PooledVerdictNeedsAgreement) {
  SimTrace flat;
  flat.horizon = 100;
  flat.lambda_sum = 1.0;
  flat.total_q.assign(100, 0);
  flat.total_qc.assign(100, 0);
  SimTrace steep = flat;
  for (int n = 0; n < 100; ++n) steep.total_q[n] = n;
  EXPECT_EQ(assess_stability(std::vector<SimTrace>{flat, flat}).verdict, Verdict::stable_evidence);
  EXPECT_EQ(assess_stability(std::vector<SimTrace>{steep, steep}).verdict,
            Verdict::unstable_evidence);
  EXPECT_EQ(assess_stability(std::vector<SimTrace>{flat, steep}).verdict, Verdict::inconclusive);
}
