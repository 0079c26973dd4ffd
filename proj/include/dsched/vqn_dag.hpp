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

// Stage-based virtual queueing network for DAG jobs on a broadcast network.
//
// A stage is a non-empty, descendant-closed set of a job's tasks: the tasks
// still to be processed. Every stage owns one processing queue. For each
// processable task k of a stage S (no parent of k inside S) and each server j
// there is a processing activity (S, k, j). When S \ {k} is non-empty the
// processed output waits in communication queue (S, k, j) and its broadcast
// moves the job to stage S \ {k}; processing the last task of a singleton
// stage completes the job.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsched/model.hpp"

namespace dsched {

inline constexpr std::size_t default_stage_cap = 20;

struct Stage {
  std::size_t job = 0;
  std::vector<std::size_t> tasks;  // local task ids, ascending
  std::uint32_t mask = 0;          // bit i set iff local task i is present

  bool contains(std::size_t local) const { return (mask >> local) & 1u; }
};

inline std::string format_stage(const Stage& s, std::size_t id_offset = 1) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.tasks.size(); ++i) os << (i ? "," : "") << s.tasks[i] + id_offset;
  os << '}';
  return os.str();
}

/// True iff `mask` is a non-empty descendant-closed subset of `job`'s tasks.
inline bool is_stage(const std::vector<std::vector<std::size_t>>& desc, std::uint32_t mask) {
  if (mask == 0) return false;
  for (std::size_t k = 0; k < desc.size(); ++k) {
    if (!((mask >> k) & 1u)) continue;
    for (std::size_t d : desc[k])
      if (!((mask >> d) & 1u)) return false;
  }
  return true;
}

/// All stages of a job, largest first and lexicographic within a size.
/// Refuses jobs above `cap` tasks since the stage count can grow
/// exponentially in the job size; serialize the DAG into a chain instead.
inline std::vector<Stage> enumerate_stages(const Job& job, std::size_t job_index = 0,
                                           std::size_t cap = default_stage_cap) {
  const std::size_t n = job.size();
  if (n > cap || n > 31)
    throw std::length_error("job " + std::to_string(job_index + 1) + " has " + std::to_string(n) +
                            " tasks; stage enumeration is capped at " + std::to_string(cap) +
                            " because the number of stages grows exponentially with the job "
                            "size (serialize the DAG into a chain instead)");
  if (!is_acyclic(job)) throw std::invalid_argument("stage enumeration requires an acyclic job");
  const auto desc = descendants(job);
  // Build closed sets upward from the sinks instead of scanning all 2^n masks:
  // a closed set stays closed after adding a task whose descendants it holds.
  std::vector<std::uint32_t> desc_mask(n, 0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t d : desc[k]) desc_mask[k] |= (1u << d);
  std::vector<std::uint32_t> found;
  std::vector<std::uint32_t> frontier{0};
  std::vector<char> seen_small;  // dense visited table is fine up to the cap
  seen_small.assign(std::size_t{1} << n, 0);
  seen_small[0] = 1;
  while (!frontier.empty()) {
    std::vector<std::uint32_t> next;
    for (std::uint32_t s : frontier) {
      for (std::size_t k = 0; k < n; ++k) {
        if ((s >> k) & 1u) continue;
        if ((desc_mask[k] & s) != desc_mask[k]) continue;
        const std::uint32_t t = s | (1u << k);
        if (seen_small[t]) continue;
        seen_small[t] = 1;
        found.push_back(t);
        next.push_back(t);
      }
    }
    frontier = std::move(next);
  }
  std::vector<Stage> stages;
  stages.reserve(found.size());
  for (std::uint32_t mask : found) {
    Stage s;
    s.job = job_index;
    s.mask = mask;
    for (std::size_t k = 0; k < n; ++k)
      if ((mask >> k) & 1u) s.tasks.push_back(k);
    stages.push_back(std::move(s));
  }
  std::sort(stages.begin(), stages.end(), [](const Stage& a, const Stage& b) {
    if (a.tasks.size() != b.tasks.size()) return a.tasks.size() > b.tasks.size();
    return a.tasks < b.tasks;
  });
  return stages;
}

struct DagQueue {
  enum class Kind { processing, communication };
  Kind kind = Kind::processing;
  std::size_t stage = 0;   // index into DagVqn::stages()
  std::size_t task = 0;    // global task (communication queues only)
  std::size_t server = 0;  // communication queues only
};

struct Activity {
  enum class Kind { processing, communication };
  static constexpr std::size_t departs = std::numeric_limits<std::size_t>::max();

  Kind kind = Kind::processing;
  std::size_t stage = 0;
  std::size_t task = 0;    // global task index
  std::size_t server = 0;
  std::size_t source = 0;  // queue drained
  std::size_t target = departs;  // queue fed, or `departs`
  double rate = 0.0;       // mu_(k,j) or b_j / c_k
};

class DagVqn {
 public:
  DagVqn(const Instance& instance, std::size_t stage_cap = default_stage_cap)
      : instance_(instance), sets_(derived_sets(instance)) {
    const std::size_t J = instance.server_count();
    std::vector<std::size_t> stage_base;
    for (std::size_t m = 0; m < instance.job_count(); ++m) {
      stage_base.push_back(stages_.size());
      auto st = enumerate_stages(instance.jobs[m], m, stage_cap);
      for (auto& s : st) stages_.push_back(std::move(s));
    }
    // Processing queues: one per stage, in enumeration order.
    std::map<std::pair<std::size_t, std::uint32_t>, std::size_t> stage_queue;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      queues_.push_back({DagQueue::Kind::processing, s, 0, 0});
      stage_queue[{stages_[s].job, stages_[s].mask}] = s;
    }
    full_stage_queue_.resize(instance.job_count());
    for (std::size_t m = 0; m < instance.job_count(); ++m)
      full_stage_queue_[m] = stage_base[m];  // the full set sorts first

    per_server_proc_.assign(J, {});
    per_server_comm_.assign(J, {});
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      const Stage& st = stages_[s];
      const std::size_t base = sets_.first_task[st.job];
      for (std::size_t local : st.tasks) {
        const std::size_t k = base + local;
        bool processable = true;
        for (std::size_t parent : sets_.parents[k])
          if (st.contains(parent - base)) processable = false;
        if (!processable) continue;
        const std::uint32_t rest = st.mask & ~(1u << local);
        for (std::size_t j = 0; j < J; ++j) {
          Activity proc;
          proc.kind = Activity::Kind::processing;
          proc.stage = s;
          proc.task = k;
          proc.server = j;
          proc.source = s;
          proc.rate = instance.net.mu[k][j];
          if (rest != 0) {
            const std::size_t cq = queues_.size();
            queues_.push_back({DagQueue::Kind::communication, s, k, j});
            proc.target = cq;
            Activity comm;
            comm.kind = Activity::Kind::communication;
            comm.stage = s;
            comm.task = k;
            comm.server = j;
            comm.source = cq;
            comm.target = stage_queue.at({st.job, rest});
            comm.rate = instance.net.bandwidth[j] / sets_.out_size[k];
            comm_activities_.push_back(comm);
          }
          proc_activities_.push_back(proc);
        }
      }
    }
    // Activities are indexed processing-first, then communication.
    activities_ = proc_activities_;
    activities_.insert(activities_.end(), comm_activities_.begin(), comm_activities_.end());
    for (std::size_t a = 0; a < activities_.size(); ++a) {
      const auto& act = activities_[a];
      (act.kind == Activity::Kind::processing ? per_server_proc_ : per_server_comm_)[act.server]
          .push_back(a);
    }
  }

  const Instance& instance() const { return instance_; }
  const DerivedSets& sets() const { return sets_; }
  const std::vector<Stage>& stages() const { return stages_; }
  const std::vector<DagQueue>& queues() const { return queues_; }
  const std::vector<Activity>& activities() const { return activities_; }
  std::size_t size() const { return queues_.size(); }
  std::size_t processing_activity_count() const { return proc_activities_.size(); }
  std::size_t communication_activity_count() const { return comm_activities_.size(); }
  std::size_t processing_queue_count() const { return stages_.size(); }
  std::size_t communication_queue_count() const { return queues_.size() - stages_.size(); }
  std::size_t servers() const { return per_server_proc_.size(); }
  std::size_t jobs() const { return full_stage_queue_.size(); }
  /// A_j and A_{c,j} as indices into activities().
  const std::vector<std::size_t>& processing_at(std::size_t j) const { return per_server_proc_[j]; }
  const std::vector<std::size_t>& communication_at(std::size_t j) const {
    return per_server_comm_[j];
  }
  /// Queue receiving fresh jobs of type m (the stage holding every task).
  std::size_t arrival_queue(std::size_t m) const { return full_stage_queue_[m]; }

  /// Arrival vector e(lambda): lambda_m on each job's full-stage queue.
  std::vector<double> arrival_vector(std::span<const double> lambda) const {
    if (lambda.size() != jobs()) throw std::invalid_argument("lambda size mismatch");
    std::vector<double> e(size(), 0.0);
    for (std::size_t m = 0; m < jobs(); ++m) e[arrival_queue(m)] = lambda[m];
    return e;
  }

  /// Dense drift matrix D (queues x activities).
  Table drift_matrix() const {
    Table d = make_table(size(), activities_.size());
    for (std::size_t a = 0; a < activities_.size(); ++a) {
      const auto& act = activities_[a];
      d[act.source][a] -= act.rate;
      if (act.target != Activity::departs) d[act.target][a] += act.rate;
    }
    return d;
  }

  std::string queue_name(std::size_t q) const {
    const auto& info = queues_[q];
    std::string name = format_stage(stages_[info.stage]);
    if (info.kind == DagQueue::Kind::communication)
      name += "_(" + std::to_string(info.task - sets_.first_task[stages_[info.stage].job] + 1) +
              "," + std::to_string(info.server + 1) + ")";
    return name;
  }

 private:
  Instance instance_;
  DerivedSets sets_;
  std::vector<Stage> stages_;
  std::vector<DagQueue> queues_;
  std::vector<Activity> proc_activities_;
  std::vector<Activity> comm_activities_;
  std::vector<Activity> activities_;
  std::vector<std::vector<std::size_t>> per_server_proc_;
  std::vector<std::vector<std::size_t>> per_server_comm_;
  std::vector<std::size_t> full_stage_queue_;
};

inline DagVqn build_dag_vqn(const Instance& instance, std::size_t stage_cap = default_stage_cap) {
  return DagVqn(instance, stage_cap);
}

struct DagQueueState {
  std::vector<std::int64_t> len;
  std::int64_t slot = 0;

  static DagQueueState empty(const DagVqn& vqn) {
    return {std::vector<std::int64_t>(vqn.size(), 0), 0};
  }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto v : len) t += v;
    return t;
  }
  bool operator==(const DagQueueState&) const = default;
};

/// Per server: at most one processing activity and one communication
/// activity (indices into DagVqn::activities(), -1 for idle).
struct DagDecision {
  std::vector<long> process;
  std::vector<long> communicate;

  static DagDecision idle(const DagVqn& vqn) {
    return {std::vector<long>(vqn.servers(), -1), std::vector<long>(vqn.servers(), -1)};
  }
  bool operator==(const DagDecision&) const = default;
};

struct DagEvents {
  std::vector<std::uint8_t> arrivals;      // per job type
  std::vector<std::uint8_t> process_done;  // per server
  std::vector<std::uint8_t> comm_done;     // per server

  static DagEvents none(const DagVqn& vqn) {
    return {std::vector<std::uint8_t>(vqn.jobs(), 0),
            std::vector<std::uint8_t>(vqn.servers(), 0),
            std::vector<std::uint8_t>(vqn.servers(), 0)};
  }
};

/// One slot of the DAG network. Several servers may work on the same stage
/// queue; completions are granted in server order against the slot-start
/// length and any excess completion is wasted. `departures`, when non-empty,
/// is incremented per job type on completion.
inline DagQueueState dag_step(const DagVqn& vqn, const DagQueueState& state,
                              const DagDecision& decision, const DagEvents& ev,
                              std::span<std::int64_t> departures = {}) {
  const std::size_t J = vqn.servers();
  if (state.len.size() != vqn.size()) throw std::invalid_argument("state size mismatch");
  if (decision.process.size() != J || decision.communicate.size() != J)
    throw std::invalid_argument("decision dimensions do not match the VQN");
  if (ev.arrivals.size() != vqn.jobs() || ev.process_done.size() != J ||
      ev.comm_done.size() != J)
    throw std::invalid_argument("event dimensions do not match the VQN");

  auto check = [&](long a, Activity::Kind kind, std::size_t j) {
    if (a < 0) return;
    if (static_cast<std::size_t>(a) >= vqn.activities().size())
      throw std::logic_error("activity index out of range");
    const auto& act = vqn.activities()[static_cast<std::size_t>(a)];
    if (act.kind != kind || act.server != j)
      throw std::logic_error("activity assigned to the wrong server or kind");
    if (state.len[act.source] <= 0) throw std::logic_error("activity chosen on an empty queue");
  };
  for (std::size_t j = 0; j < J; ++j) {
    check(decision.process[j], Activity::Kind::processing, j);
    check(decision.communicate[j], Activity::Kind::communication, j);
  }

  DagQueueState next = state;
  ++next.slot;
  std::vector<std::int64_t> available = state.len;
  auto apply = [&](long a) {
    const auto& act = vqn.activities()[static_cast<std::size_t>(a)];
    if (available[act.source] <= 0) return;
    --available[act.source];
    --next.len[act.source];
    if (act.target != Activity::departs) {
      ++next.len[act.target];
    } else if (!departures.empty()) {
      ++departures[vqn.stages()[act.stage].job];
    }
  };
  for (std::size_t m = 0; m < vqn.jobs(); ++m)
    if (ev.arrivals[m]) ++next.len[vqn.arrival_queue(m)];
  for (std::size_t j = 0; j < J; ++j) {
    if (ev.process_done[j]) {
      if (decision.process[j] < 0) throw std::logic_error("completion on an idle server");
      apply(decision.process[j]);
    }
    if (ev.comm_done[j]) {
      if (decision.communicate[j] < 0) throw std::logic_error("broadcast on an idle server");
      apply(decision.communicate[j]);
    }
  }
  return next;
}

}  // namespace dsched
