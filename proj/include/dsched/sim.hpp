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

// Slotted simulation of the virtual queueing networks.
//
// Each slot: Bernoulli arrivals are drawn per job type, the policy decides
// from the slot-start queue lengths, then service completions (Bernoulli mu)
// and transfer completions (Bernoulli b/c) are drawn for the chosen nonempty
// queues, in task-major order. Everything comes from one mt19937_64 stream,
// so a run is a pure function of (instance, config).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsched/capacity.hpp"
#include "dsched/model.hpp"
#include "dsched/policy.hpp"
#include "dsched/rng.hpp"
#include "dsched/vqn_chain.hpp"
#include "dsched/vqn_dag.hpp"

namespace dsched {

enum class PolicyKind { maxweight, brute_force, static_allocation };

inline const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::maxweight: return "maxweight";
    case PolicyKind::brute_force: return "brute-force";
    case PolicyKind::static_allocation: return "static-allocation";
  }
  return "?";
}

struct SimConfig {
  std::int64_t horizon = 10'000;
  std::uint64_t seed = 1;
  double warmup = 0.2;  // fraction of slots ignored by the slope fit
  PolicyKind policy = PolicyKind::maxweight;
  std::size_t replications = 1;
  TieBreak tie_break = TieBreak::random;
  bool check_conservation = false;  // verify queue totals every slot
};

inline void check_config(const SimConfig& c) {
  if (c.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(c.warmup >= 0.0 && c.warmup <= 0.9))
    throw std::invalid_argument("warmup must lie in [0, 0.9]");
  if (c.replications < 1) throw std::invalid_argument("need at least one replication");
}

struct SimTrace {
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  double lambda_sum = 0.0;
  // Per slot, after the slot's transitions. arrivals / departures are
  // cumulative job counts.
  std::vector<std::int64_t> total_q;
  std::vector<std::int64_t> total_qc;
  std::vector<std::int64_t> arrivals;
  std::vector<std::int64_t> departures;
  std::vector<double> mean_len;  // per queue, averaged over slots
  std::vector<std::int64_t> final_len;
  std::vector<std::int64_t> arrivals_by_type;
  std::vector<std::int64_t> departures_by_type;

  double qn_over_n() const {
    if (total_q.empty()) return 0.0;
    return static_cast<double>(total_q.back() + total_qc.back()) / static_cast<double>(horizon);
  }
};

enum class Verdict { stable_evidence, unstable_evidence, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::stable_evidence: return "stable-evidence";
    case Verdict::unstable_evidence: return "unstable-evidence";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

/// Heuristic cut-offs; slopes are relative to the total arrival rate.
struct StabilityThresholds {
  double stable_qn_over_n = 0.02;
  double stable_slope = 0.005;
  double unstable_slope = 0.05;
};

struct StabilityVerdict {
  double qn_over_n = 0.0;
  double slope = 0.0;
  Verdict verdict = Verdict::inconclusive;
};

namespace detail {

inline void require_simulable(const Instance& instance) {
  const auto report = validate(instance);
  if (!report.valid_for_simulation())
    throw std::invalid_argument("instance is not simulable as given (use rescale_for_simulation "
                                "for rates above one):\n" +
                                report.summary());
}

class Recorder {
 public:
  Recorder(const Instance& instance, const SimConfig& cfg, std::size_t queues) {
    t_.seed = cfg.seed;
    t_.horizon = cfg.horizon;
    for (double l : instance.lambda) t_.lambda_sum += l;
    const auto n = static_cast<std::size_t>(cfg.horizon);
    t_.total_q.reserve(n);
    t_.total_qc.reserve(n);
    t_.arrivals.reserve(n);
    t_.departures.reserve(n);
    t_.mean_len.assign(queues, 0.0);
    sums_.assign(queues, 0);
    t_.arrivals_by_type.assign(instance.job_count(), 0);
    t_.departures_by_type.assign(instance.job_count(), 0);
    check_ = cfg.check_conservation;
  }

  std::vector<std::int64_t>& arrivals_by_type() { return t_.arrivals_by_type; }
  std::vector<std::int64_t>& departures_by_type() { return t_.departures_by_type; }

  void record(const std::vector<std::int64_t>& len, std::size_t processing_queues) {
    std::int64_t q = 0, qc = 0;
    for (std::size_t i = 0; i < len.size(); ++i) {
      sums_[i] += len[i];
      (i < processing_queues ? q : qc) += len[i];
    }
    std::int64_t arr = 0, dep = 0;
    for (auto v : t_.arrivals_by_type) arr += v;
    for (auto v : t_.departures_by_type) dep += v;
    if (check_ && q + qc != arr - dep)
      throw std::logic_error("conservation violated at slot " +
                             std::to_string(t_.total_q.size() + 1));
    t_.total_q.push_back(q);
    t_.total_qc.push_back(qc);
    t_.arrivals.push_back(arr);
    t_.departures.push_back(dep);
  }

  SimTrace finish(const std::vector<std::int64_t>& len) {
    t_.final_len = len;
    for (std::size_t i = 0; i < sums_.size(); ++i)
      t_.mean_len[i] = static_cast<double>(sums_[i]) / static_cast<double>(t_.horizon);
    return std::move(t_);
  }

 private:
  SimTrace t_;
  std::vector<std::int64_t> sums_;
  bool check_ = false;
};

// Shared chain loop; `decide` produces the slot's Decision from the state.
template <class Decide>
SimTrace run_chain_loop(const ChainVqn& vqn, const SimConfig& cfg, Rng& rng, Decide&& decide) {
  const std::size_t K = vqn.tasks(), J = vqn.servers(), M = vqn.jobs();
  Recorder rec(vqn.instance(), cfg, vqn.size());
  QueueState state = QueueState::empty(vqn);
  SlotEvents ev = SlotEvents::none(vqn);
  for (std::int64_t n = 0; n < cfg.horizon; ++n) {
    for (std::size_t m = 0; m < M; ++m) {
      ev.arrivals[m] = bernoulli(rng, vqn.lambda(m)) ? 1 : 0;
      rec.arrivals_by_type()[m] += ev.arrivals[m];
    }
    const Decision d = decide(state);
    std::fill(ev.done.begin(), ev.done.end(), 0);
    std::fill(ev.sent.begin(), ev.sent.end(), 0);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < J; ++j)
        if (d.process[j] == static_cast<int>(k) && state.len[vqn.proc(k, j)] > 0 &&
            bernoulli(rng, vqn.mu(k, j))) {
          ev.done[k * J + j] = 1;
          if (vqn.is_terminal(k)) ++rec.departures_by_type()[vqn.job_of(k)];
        }
    for (std::size_t k = 0; k < K; ++k) {
      if (!vqn.has_comm(k)) continue;
      for (std::size_t j = 0; j < J; ++j)
        if (d.send[j] == static_cast<int>(k) && state.len[vqn.comm(k, j)] > 0 &&
            bernoulli(rng, vqn.send_rate(k, j)))
          ev.sent[k * J + j] = 1;
    }
    state = step(vqn, state, d, ev);
    rec.record(state.len, K * J);
  }
  return rec.finish(state.len);
}

}  // namespace detail

/// Max-Weight (or the exhaustive oracle policy) on a chain network.
inline SimTrace run_chain(const Instance& instance, const SimConfig& cfg) {
  check_config(cfg);
  detail::require_chains(instance, "chain simulation");
  detail::require_simulable(instance);
  const ChainVqn vqn(instance);
  Rng rng(cfg.seed);
  TieBreaker ties(cfg.tie_break, &rng);
  switch (cfg.policy) {
    case PolicyKind::maxweight:
      return detail::run_chain_loop(vqn, cfg, rng, [&](const QueueState& s) {
        return maxweight_chain(vqn, s, ties);
      });
    case PolicyKind::brute_force: {
      const ChainBruteForce oracle(vqn);
      return detail::run_chain_loop(vqn, cfg, rng, [&](const QueueState& s) {
        return oracle.minimize(s).decision;
      });
    }
    case PolicyKind::static_allocation:
      throw std::invalid_argument("static allocation needs an allocation; use run_static_allocation");
  }
  throw std::invalid_argument("unknown policy");
}

/// Randomized static policy: each slot server j processes task k with
/// probability p(k,j) and transmits for task k with probability q(k,j); jobs
/// are routed by u, outputs kept with probability s and forwarded by w.
inline SimTrace run_static_allocation(const Instance& instance, const AllocationVectors& alloc,
                                      const Table& p, const Table& q, const SimConfig& cfg) {
  check_config(cfg);
  detail::require_chains(instance, "static allocation");
  detail::require_simulable(instance);
  const ChainVqn vqn(instance);
  const std::size_t K = vqn.tasks(), J = vqn.servers(), M = vqn.jobs();
  if (p.size() != K || q.size() != K || alloc.u.size() != M || alloc.s.size() != K ||
      alloc.w.size() != K)
    throw std::invalid_argument("allocation shape does not match the instance");
  Rng rng(cfg.seed);

  // Inverse-CDF draw over `weights`; returns weights.size() for the residual.
  auto pick = [&](auto&& weight, std::size_t n) {
    const double x = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += weight(i);
      if (x < acc) return i;
    }
    return n;
  };

  return detail::run_chain_loop(vqn, cfg, rng, [&](const QueueState&) {
    Decision d = Decision::idle(vqn);
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t j = pick([&](std::size_t i) { return alloc.u[m][i]; }, J);
      d.route[m] = static_cast<int>(j < J ? j : J - 1);
    }
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t kp = pick([&](std::size_t k) { return p[k][j]; }, K);
      if (kp < K) {
        d.process[j] = static_cast<int>(kp);
        if (vqn.has_comm(kp)) d.keep[kp * J + j] = bernoulli(rng, alloc.s[kp][j]) ? 1 : 0;
      }
      const std::size_t kc =
          pick([&](std::size_t k) { return vqn.has_comm(k) ? q[k][j] : 0.0; }, K);
      if (kc < K && J > 1) {
        d.send[j] = static_cast<int>(kc);
        const std::size_t l = pick([&](std::size_t i) { return alloc.w[kc][j][i]; }, J);
        // Round-off can leave the residual selected; fall back to a peer.
        d.forward[kc * J + j] = static_cast<int>(l < J && l != j ? l : (j == 0 ? 1 : 0));
      }
    }
    return d;
  });
}

/// Max-Weight on the stage network of a DAG (chain jobs are accepted and
/// treated as DAGs).
inline SimTrace run_dag(const Instance& instance, const SimConfig& cfg,
                        std::size_t stage_cap = default_stage_cap) {
  check_config(cfg);
  if (cfg.policy == PolicyKind::static_allocation)
    throw std::invalid_argument("static allocation is defined for chain networks only");
  detail::require_simulable(instance);
  const DagVqn vqn(instance, stage_cap);
  const std::size_t J = vqn.servers(), M = vqn.jobs();
  Rng rng(cfg.seed);
  TieBreaker ties(cfg.tie_break, &rng);
  detail::Recorder rec(instance, cfg, vqn.size());
  DagQueueState state = DagQueueState::empty(vqn);
  DagEvents ev = DagEvents::none(vqn);
  for (std::int64_t n = 0; n < cfg.horizon; ++n) {
    for (std::size_t m = 0; m < M; ++m) {
      ev.arrivals[m] = bernoulli(rng, instance.lambda[m]) ? 1 : 0;
      rec.arrivals_by_type()[m] += ev.arrivals[m];
    }
    DagDecision d;
    if (cfg.policy == PolicyKind::brute_force)
      d = brute_force_dag(vqn, state).decision;
    else
      d = maxweight_dag(vqn, state, ties);
    // Drop choices on empty sources (the exhaustive policy may pick them).
    for (std::size_t j = 0; j < J; ++j) {
      for (long* a : {&d.process[j], &d.communicate[j]})
        if (*a >= 0 && state.len[vqn.activities()[static_cast<std::size_t>(*a)].source] == 0)
          *a = -1;
    }
    for (std::size_t j = 0; j < J; ++j)
      ev.process_done[j] =
          d.process[j] >= 0 &&
          bernoulli(rng, vqn.activities()[static_cast<std::size_t>(d.process[j])].rate);
    for (std::size_t j = 0; j < J; ++j)
      ev.comm_done[j] =
          d.communicate[j] >= 0 &&
          bernoulli(rng, vqn.activities()[static_cast<std::size_t>(d.communicate[j])].rate);
    state = dag_step(vqn, state, d, ev, rec.departures_by_type());
    rec.record(state.len, vqn.processing_queue_count());
  }
  return rec.finish(state.len);
}

/// Dispatches on the job kind.
inline SimTrace simulate(const Instance& instance, const SimConfig& cfg) {
  return instance.all_chains() ? run_chain(instance, cfg) : run_dag(instance, cfg);
}

/// Replications with seeds seed, seed + 1, ...
template <class Runner>
std::vector<SimTrace> replicate(const SimConfig& cfg, Runner&& run) {
  check_config(cfg);
  std::vector<SimTrace> out;
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    SimConfig c = cfg;
    c.seed = cfg.seed + r;
    c.replications = 1;
    out.push_back(run(c));
  }
  return out;
}

inline StabilityVerdict assess_stability(const SimTrace& trace, double warmup = 0.2,
                                         const StabilityThresholds& th = {}) {
  StabilityVerdict v;
  v.qn_over_n = trace.qn_over_n();
  const std::size_t n = trace.total_q.size();
  const auto first = static_cast<std::size_t>(warmup * static_cast<double>(n));
  const std::size_t count = n - first;
  if (count >= 2) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = first; i < n; ++i) {
      sx += static_cast<double>(i + 1);
      sy += static_cast<double>(trace.total_q[i] + trace.total_qc[i]);
    }
    const double mx = sx / static_cast<double>(count), my = sy / static_cast<double>(count);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = first; i < n; ++i) {
      const double dx = static_cast<double>(i + 1) - mx;
      sxy += dx * (static_cast<double>(trace.total_q[i] + trace.total_qc[i]) - my);
      sxx += dx * dx;
    }
    v.slope = sxy / sxx;
  }
  const double mass = trace.lambda_sum;
  if (v.qn_over_n < th.stable_qn_over_n && v.slope <= th.stable_slope * mass)
    v.verdict = Verdict::stable_evidence;
  else if (v.slope > th.unstable_slope * mass)
    v.verdict = Verdict::unstable_evidence;
  else
    v.verdict = Verdict::inconclusive;
  return v;
}

/// Pooled verdict: agreement of every replication, else inconclusive.
/// qn_over_n is the worst replication's, the slope the mean.
inline StabilityVerdict assess_stability(const std::vector<SimTrace>& traces, double warmup = 0.2,
                                         const StabilityThresholds& th = {}) {
  StabilityVerdict pooled;
  if (traces.empty()) return pooled;
  std::optional<Verdict> common;
  bool agree = true;
  for (const auto& t : traces) {
    const auto v = assess_stability(t, warmup, th);
    pooled.qn_over_n = std::max(pooled.qn_over_n, v.qn_over_n);
    pooled.slope += v.slope / static_cast<double>(traces.size());
    if (!common) common = v.verdict;
    else if (*common != v.verdict) agree = false;
  }
  pooled.verdict = agree ? *common : Verdict::inconclusive;
  return pooled;
}

}  // namespace dsched
