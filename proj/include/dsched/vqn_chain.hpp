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

// Virtual queueing network for chain jobs: one processing queue per
// (task, server) and one communication queue per (non-terminal task, server),
// (2K - M) J queues in total.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsched/model.hpp"

namespace dsched {

class ChainVqn {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  explicit ChainVqn(Instance instance) : instance_(std::move(instance)) {
    if (!instance_.all_chains()) throw std::invalid_argument("chain VQN requires chain jobs");
    sets_ = derived_sets(instance_);
    K_ = instance_.task_count();
    J_ = instance_.server_count();
    M_ = instance_.job_count();
    comm_row_.assign(K_, npos);
    std::size_t next = 0;
    for (std::size_t k = 0; k < K_; ++k)
      if (!sets_.is_terminal(k)) comm_row_[k] = next++;
    size_ = K_ * J_ + next * J_;
  }

  std::size_t size() const { return size_; }
  std::size_t tasks() const { return K_; }
  std::size_t servers() const { return J_; }
  std::size_t jobs() const { return M_; }
  const Instance& instance() const { return instance_; }
  const DerivedSets& sets() const { return sets_; }

  bool has_comm(std::size_t k) const { return comm_row_[k] != npos; }
  bool is_root(std::size_t k) const { return sets_.is_root(k); }
  bool is_terminal(std::size_t k) const { return !has_comm(k); }
  std::size_t root_of(std::size_t m) const { return sets_.first_task[m]; }
  std::size_t job_of(std::size_t k) const { return sets_.job_of[k]; }

  /// Flat id of processing queue (k, j).
  std::size_t proc(std::size_t k, std::size_t j) const { return k * J_ + j; }
  /// Flat id of communication queue (k, j),c; k must be non-terminal.
  std::size_t comm(std::size_t k, std::size_t j) const {
    if (!has_comm(k))
      throw std::out_of_range("task " + std::to_string(k) + " has no communication queue");
    return K_ * J_ + comm_row_[k] * J_ + j;
  }

  double mu(std::size_t k, std::size_t j) const { return instance_.net.mu[k][j]; }
  /// Per-slot transfer success rate b_j / c_k.
  double send_rate(std::size_t k, std::size_t j) const {
    return instance_.net.bandwidth[j] / sets_.out_size[k];
  }
  double lambda(std::size_t m) const { return instance_.lambda[m]; }

 private:
  Instance instance_;
  DerivedSets sets_;
  std::size_t K_ = 0, J_ = 0, M_ = 0, size_ = 0;
  std::vector<std::size_t> comm_row_;
};

inline ChainVqn build_vqn(const Instance& instance) { return ChainVqn(instance); }

struct QueueState {
  std::vector<std::int64_t> len;
  std::int64_t slot = 0;

  static QueueState empty(const ChainVqn& vqn) {
    return {std::vector<std::int64_t>(vqn.size(), 0), 0};
  }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto v : len) t += v;
    return t;
  }
  bool operator==(const QueueState&) const = default;
};

/// Per-slot decision. Binary vectors are stored by their single active index:
/// `route[m]` is the server u routes job type m to, `process[j]` / `send[j]`
/// the task server j processes / transmits (-1 when idle), `keep[k*J+j]` is
/// s_{k,j->j} and `forward[k*J+j]` the server l with w_{k,j->l} = 1.
struct Decision {
  std::vector<int> route;
  std::vector<int> process;
  std::vector<int> send;
  std::vector<std::uint8_t> keep;
  std::vector<int> forward;

  static Decision idle(const ChainVqn& vqn) {
    const std::size_t K = vqn.tasks(), J = vqn.servers();
    Decision d;
    d.route.assign(vqn.jobs(), 0);
    d.process.assign(J, -1);
    d.send.assign(J, -1);
    d.keep.assign(K * J, 1);
    // Lowest-index server other than j; meaningless (0) on a single server.
    d.forward.assign(K * J, 0);
    for (std::size_t k = 0; k < K; ++k) d.forward[k * J] = J > 1 ? 1 : 0;
    return d;
  }
  bool operator==(const Decision&) const = default;
};

/// Random outcomes of one slot: job arrivals per type, processing completions
/// d[k*J+j] and communication completions dc[k*J+j].
struct SlotEvents {
  std::vector<std::uint8_t> arrivals;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> sent;

  static SlotEvents none(const ChainVqn& vqn) {
    const std::size_t n = vqn.tasks() * vqn.servers();
    return {std::vector<std::uint8_t>(vqn.jobs(), 0), std::vector<std::uint8_t>(n, 0),
            std::vector<std::uint8_t>(n, 0)};
  }
};

inline void check_decision_shape(const ChainVqn& vqn, const Decision& d) {
  const std::size_t K = vqn.tasks(), J = vqn.servers();
  if (d.route.size() != vqn.jobs() || d.process.size() != J || d.send.size() != J ||
      d.keep.size() != K * J || d.forward.size() != K * J)
    throw std::invalid_argument("decision dimensions do not match the VQN");
}

/// One slot of the queue dynamics. Arrivals, completions and transfers all
/// act on the slot-start lengths. Throws std::logic_error when an event is
/// not permitted by the decision or hits an empty queue.
inline QueueState step(const ChainVqn& vqn, const QueueState& state, const Decision& decision,
                       const SlotEvents& ev) {
  const std::size_t K = vqn.tasks(), J = vqn.servers();
  check_decision_shape(vqn, decision);
  if (state.len.size() != vqn.size()) throw std::invalid_argument("state size mismatch");
  if (ev.arrivals.size() != vqn.jobs() || ev.done.size() != K * J || ev.sent.size() != K * J)
    throw std::invalid_argument("event dimensions do not match the VQN");

  QueueState next = state;
  ++next.slot;
  for (std::size_t m = 0; m < vqn.jobs(); ++m) {
    if (!ev.arrivals[m]) continue;
    const int j = decision.route[m];
    if (j < 0 || static_cast<std::size_t>(j) >= J)
      throw std::logic_error("arrival routed to invalid server");
    ++next.len[vqn.proc(vqn.root_of(m), static_cast<std::size_t>(j))];
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t idx = k * J + j;
      if (ev.done[idx]) {
        if (decision.process[j] != static_cast<int>(k))
          throw std::logic_error("completion on (" + std::to_string(k) + "," + std::to_string(j) +
                                 ") without a processing decision");
        if (state.len[vqn.proc(k, j)] <= 0)
          throw std::logic_error("completion on an empty processing queue");
        --next.len[vqn.proc(k, j)];
        if (vqn.has_comm(k)) {
          if (decision.keep[idx])
            ++next.len[vqn.proc(k + 1, j)];
          else
            ++next.len[vqn.comm(k, j)];
        }
      }
      if (ev.sent[idx]) {
        if (!vqn.has_comm(k)) throw std::logic_error("transfer on a terminal task");
        if (decision.send[j] != static_cast<int>(k))
          throw std::logic_error("transfer without a communication decision");
        if (state.len[vqn.comm(k, j)] <= 0)
          throw std::logic_error("transfer from an empty communication queue");
        const int l = decision.forward[idx];
        if (l < 0 || static_cast<std::size_t>(l) >= J || static_cast<std::size_t>(l) == j)
          throw std::logic_error("transfer forwarded to an invalid server");
        --next.len[vqn.comm(k, j)];
        ++next.len[vqn.proc(k + 1, static_cast<std::size_t>(l))];
      }
    }
  }
  return next;
}

}  // namespace dsched
