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

// Max-Weight scheduling for both virtual queueing networks, plus exhaustive
// oracles used by the tests.
//
// For chains the policy minimizes Q^T E[dQ] + Q_c^T E[dQ_c] over one slot's
// binary decisions. The objective separates into independent pieces:
//   routing      lambda_m Q(root, j)                      -> j_u(m)
//   processing   F(k,j) = mu (min(Q(k+1,j), Qc(k,j)) - Q(k,j))   (k not last)
//                F(k,j) = -mu Q(k,j)                       (k last)
//   forwarding   argmin over l != j of Q(k+1, l)           -> j_w(k,j)
//   transfer     G(k,j) = b_j/c_k (min_{l!=j} Q(k+1,l) - Qc(k,j))
// Server j processes argmin_k F (idle unless negative) and transmits
// argmin_k G (idle unless negative), considering nonempty queues only.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsched/model.hpp"
#include "dsched/rng.hpp"
#include "dsched/vqn_chain.hpp"
#include "dsched/vqn_dag.hpp"

namespace dsched {

enum class TieBreak { random, lowest_index };

inline const char* to_string(TieBreak t) {
  return t == TieBreak::random ? "random" : "lowest-index";
}

struct PolicyConfig {
  std::uint64_t seed = 1;
  TieBreak tie_break = TieBreak::random;
};

/// Resolves ties among exactly equal scores. Random mode draws from the
/// caller's generator; lowest-index mode never touches it.
class TieBreaker {
 public:
  explicit TieBreaker(TieBreak mode, Rng* rng = nullptr) : mode_(mode), rng_(rng) {
    if (mode_ == TieBreak::random && rng_ == nullptr)
      throw std::invalid_argument("random tie-breaking needs a generator");
  }

  /// Index of the smallest value among `candidates` (positions into
  /// `values`); npos when `candidates` is empty.
  std::size_t argmin(const std::vector<double>& values, const std::vector<std::size_t>& candidates) {
    if (candidates.empty()) return npos;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : candidates) best = std::min(best, values[c]);
    ties_.clear();
    for (std::size_t c : candidates)
      if (values[c] == best) ties_.push_back(c);
    if (mode_ == TieBreak::lowest_index || ties_.size() == 1) return ties_.front();
    return ties_[uniform_index(*rng_, ties_.size())];
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  TieBreak mode_;
  Rng* rng_;
  std::vector<std::size_t> ties_;
};

// ---------------------------------------------------------------------------
// Chains

struct ScoreTable {
  Table F;                              // [task][server]
  Table G;                              // [task][server]; +inf where undefined
  std::vector<std::size_t> j_u;         // [job]
  std::vector<std::vector<std::uint8_t>> s_star;  // [task][server]
  std::vector<long> k_F;                // [server], -1 idle
  std::vector<std::vector<std::size_t>> j_w;      // [task][server]
  std::vector<long> k_G;                // [server], -1 idle
};

inline ScoreTable chain_scores(const ChainVqn& vqn, const QueueState& state, TieBreaker& ties) {
  const std::size_t K = vqn.tasks(), J = vqn.servers(), M = vqn.jobs();
  if (state.len.size() != vqn.size()) throw std::invalid_argument("state size mismatch");
  const auto Q = [&](std::size_t k, std::size_t j) {
    return static_cast<double>(state.len[vqn.proc(k, j)]);
  };
  const auto Qc = [&](std::size_t k, std::size_t j) {
    return static_cast<double>(state.len[vqn.comm(k, j)]);
  };
  const double inf = std::numeric_limits<double>::infinity();

  ScoreTable t;
  t.F = make_table(K, J);
  t.G = make_table(K, J, inf);
  t.s_star.assign(K, std::vector<std::uint8_t>(J, 1));
  t.j_w.assign(K, std::vector<std::size_t>(J, 0));
  t.k_F.assign(J, -1);
  t.k_G.assign(J, -1);

  std::vector<double> values(J);
  std::vector<std::size_t> all(J);
  for (std::size_t j = 0; j < J; ++j) all[j] = j;

  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < J; ++j) values[j] = Q(vqn.root_of(m), j);
    t.j_u.push_back(ties.argmin(values, all));
  }

  std::vector<std::size_t> others;
  for (std::size_t k = 0; k < K; ++k) {
    if (vqn.is_terminal(k)) {
      for (std::size_t j = 0; j < J; ++j) t.F[k][j] = -vqn.mu(k, j) * Q(k, j);
      continue;
    }
    for (std::size_t j = 0; j < J; ++j) values[j] = Q(k + 1, j);
    for (std::size_t j = 0; j < J; ++j) {
      const double down = Q(k + 1, j), wait = Qc(k, j);
      t.s_star[k][j] = down - wait <= 0.0 ? 1 : 0;
      t.F[k][j] = vqn.mu(k, j) * (std::min(down, wait) - Q(k, j));
      if (J == 1) continue;  // no peer to forward to; G stays undefined
      others.clear();
      for (std::size_t l = 0; l < J; ++l)
        if (l != j) others.push_back(l);
      t.j_w[k][j] = ties.argmin(values, others);
      t.G[k][j] = vqn.send_rate(k, j) * (values[t.j_w[k][j]] - wait);
    }
  }

  std::vector<double> col(K);
  std::vector<std::size_t> cand;
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < K; ++k) col[k] = t.F[k][j];
    cand.clear();
    for (std::size_t k = 0; k < K; ++k)
      if (state.len[vqn.proc(k, j)] > 0 && t.F[k][j] < 0.0) cand.push_back(k);
    const std::size_t kf = ties.argmin(col, cand);
    if (kf != TieBreaker::npos) t.k_F[j] = static_cast<long>(kf);

    for (std::size_t k = 0; k < K; ++k) col[k] = t.G[k][j];
    cand.clear();
    for (std::size_t k = 0; k < K; ++k)
      if (vqn.has_comm(k) && state.len[vqn.comm(k, j)] > 0 && t.G[k][j] < 0.0) cand.push_back(k);
    const std::size_t kg = ties.argmin(col, cand);
    if (kg != TieBreaker::npos) t.k_G[j] = static_cast<long>(kg);
  }
  return t;
}

inline Decision decision_from_scores(const ChainVqn& vqn, const ScoreTable& t) {
  const std::size_t K = vqn.tasks(), J = vqn.servers();
  Decision d = Decision::idle(vqn);
  for (std::size_t m = 0; m < vqn.jobs(); ++m) d.route[m] = static_cast<int>(t.j_u[m]);
  for (std::size_t j = 0; j < J; ++j) {
    d.process[j] = static_cast<int>(t.k_F[j]);
    d.send[j] = static_cast<int>(t.k_G[j]);
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (vqn.is_terminal(k)) continue;
    for (std::size_t j = 0; j < J; ++j) {
      d.keep[k * J + j] = t.s_star[k][j];
      if (J > 1) d.forward[k * J + j] = static_cast<int>(t.j_w[k][j]);
    }
  }
  return d;
}

inline Decision maxweight_chain(const ChainVqn& vqn, const QueueState& state, TieBreaker& ties) {
  return decision_from_scores(vqn, chain_scores(vqn, state, ties));
}

/// Lowest-index convenience overload.
inline Decision maxweight_chain(const ChainVqn& vqn, const QueueState& state) {
  TieBreaker ties(TieBreak::lowest_index);
  return maxweight_chain(vqn, state, ties);
}

/// Conditional expected one-slot change of every queue under `d`, ignoring
/// emptiness (the fluid drift the objective is written in).
inline std::vector<double> expected_drift(const ChainVqn& vqn, const Decision& d) {
  check_decision_shape(vqn, d);
  const std::size_t J = vqn.servers();
  std::vector<double> drift(vqn.size(), 0.0);
  for (std::size_t m = 0; m < vqn.jobs(); ++m)
    drift[vqn.proc(vqn.root_of(m), static_cast<std::size_t>(d.route[m]))] += vqn.lambda(m);
  for (std::size_t j = 0; j < J; ++j) {
    if (d.process[j] >= 0) {
      const auto k = static_cast<std::size_t>(d.process[j]);
      const double rate = vqn.mu(k, j);
      drift[vqn.proc(k, j)] -= rate;
      if (vqn.has_comm(k)) {
        if (d.keep[k * J + j])
          drift[vqn.proc(k + 1, j)] += rate;
        else
          drift[vqn.comm(k, j)] += rate;
      }
    }
    if (d.send[j] >= 0) {
      const auto k = static_cast<std::size_t>(d.send[j]);
      const double rate = vqn.send_rate(k, j);
      drift[vqn.comm(k, j)] -= rate;
      drift[vqn.proc(k + 1, static_cast<std::size_t>(d.forward[k * J + j]))] += rate;
    }
  }
  return drift;
}

inline double drift_objective(const ChainVqn& vqn, const QueueState& state, const Decision& d) {
  const auto drift = expected_drift(vqn, d);
  double v = 0.0;
  for (std::size_t i = 0; i < drift.size(); ++i) v += static_cast<double>(state.len[i]) * drift[i];
  return v;
}

/// Every binary decision tuple of a small chain network. Entries of s and w
/// that cannot affect the objective (tasks not selected on that server) are
/// still enumerated, so the space is the full product.
class ChainDecisionSpace {
 public:
  static constexpr std::uint64_t max_size = 1'000'000;

  explicit ChainDecisionSpace(const ChainVqn& vqn) : vqn_(&vqn) {
    const std::size_t K = vqn.tasks(), J = vqn.servers();
    std::size_t nonterminal = 0;
    for (std::size_t k = 0; k < K; ++k) nonterminal += vqn.has_comm(k) ? 1 : 0;
    radix_.clear();
    for (std::size_t m = 0; m < vqn.jobs(); ++m) radix_.push_back(J);
    for (std::size_t j = 0; j < J; ++j) radix_.push_back(K + 1);
    for (std::size_t j = 0; j < J; ++j) radix_.push_back(nonterminal + 1);
    for (std::size_t k = 0; k < K; ++k)
      if (vqn.has_comm(k))
        for (std::size_t j = 0; j < J; ++j) {
          radix_.push_back(2);
          radix_.push_back(J > 1 ? J - 1 : 1);
        }
    size_ = 1;
    for (std::size_t r : radix_) {
      if (size_ > max_size / r)
        throw std::length_error("decision space exceeds " + std::to_string(max_size) + " tuples");
      size_ *= r;
    }
    for (std::size_t k = 0; k < K; ++k)
      if (vqn.has_comm(k)) sendable_.push_back(k);
  }

  std::uint64_t size() const { return size_; }

  Decision at(std::uint64_t index) const {
    const ChainVqn& vqn = *vqn_;
    const std::size_t K = vqn.tasks(), J = vqn.servers();
    std::vector<std::size_t> digit(radix_.size());
    for (std::size_t i = 0; i < radix_.size(); ++i) {
      digit[i] = static_cast<std::size_t>(index % radix_[i]);
      index /= radix_[i];
    }
    Decision d = Decision::idle(vqn);
    std::size_t pos = 0;
    for (std::size_t m = 0; m < vqn.jobs(); ++m) d.route[m] = static_cast<int>(digit[pos++]);
    for (std::size_t j = 0; j < J; ++j) d.process[j] = static_cast<int>(digit[pos++]) - 1;
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t v = digit[pos++];
      d.send[j] = v == 0 ? -1 : static_cast<int>(sendable_[v - 1]);
    }
    for (std::size_t k = 0; k < K; ++k)
      if (vqn.has_comm(k))
        for (std::size_t j = 0; j < J; ++j) {
          d.keep[k * J + j] = static_cast<std::uint8_t>(digit[pos++]);
          const std::size_t o = digit[pos++];
          d.forward[k * J + j] = J > 1 ? static_cast<int>(o < j ? o : o + 1) : 0;
        }
    return d;
  }

 private:
  const ChainVqn* vqn_;
  std::vector<std::size_t> radix_;
  std::vector<std::size_t> sendable_;
  std::uint64_t size_ = 1;
};

struct BruteForceResult {
  Decision decision;
  double objective = 0.0;
};

/// Exact minimizer of the drift objective by enumeration. The expected drift
/// of every tuple is tabulated once, so repeated queries only take dot
/// products. Returns the first minimizer in enumeration order.
class ChainBruteForce {
 public:
  explicit ChainBruteForce(const ChainVqn& vqn) : vqn_(&vqn), space_(vqn) {
    if (vqn.servers() == 1)
      throw std::invalid_argument("brute force needs at least two servers to forward between");
    const std::size_t n = vqn.size();
    drift_.reserve(static_cast<std::size_t>(space_.size()) * n);
    for (std::uint64_t i = 0; i < space_.size(); ++i) {
      const auto d = expected_drift(vqn, space_.at(i));
      drift_.insert(drift_.end(), d.begin(), d.end());
    }
  }

  BruteForceResult minimize(const QueueState& state) const {
    const std::size_t n = vqn_->size();
    if (state.len.size() != n) throw std::invalid_argument("state size mismatch");
    std::vector<double> q(state.len.begin(), state.len.end());
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t arg = 0;
    for (std::uint64_t i = 0; i < space_.size(); ++i) {
      const double* row = drift_.data() + i * n;
      double v = 0.0;
      for (std::size_t x = 0; x < n; ++x) v += q[x] * row[x];
      if (v < best) {
        best = v;
        arg = i;
      }
    }
    return {space_.at(arg), best};
  }

  const ChainDecisionSpace& space() const { return space_; }

 private:
  const ChainVqn* vqn_;
  ChainDecisionSpace space_;
  std::vector<double> drift_;
};

inline BruteForceResult brute_force_chain(const ChainVqn& vqn, const QueueState& state) {
  return ChainBruteForce(vqn).minimize(state);
}

// ---------------------------------------------------------------------------
// DAGs

/// (Q^T D)_a for every activity.
inline std::vector<double> dag_scores(const DagVqn& vqn, const DagQueueState& state) {
  if (state.len.size() != vqn.size()) throw std::invalid_argument("state size mismatch");
  std::vector<double> score(vqn.activities().size());
  for (std::size_t a = 0; a < score.size(); ++a) {
    const auto& act = vqn.activities()[a];
    double gain = -static_cast<double>(state.len[act.source]);
    if (act.target != Activity::departs) gain += static_cast<double>(state.len[act.target]);
    score[a] = act.rate * gain;
  }
  return score;
}

inline DagDecision maxweight_dag(const DagVqn& vqn, const DagQueueState& state, TieBreaker& ties) {
  const auto score = dag_scores(vqn, state);
  DagDecision d = DagDecision::idle(vqn);
  std::vector<std::size_t> cand;
  auto choose = [&](const std::vector<std::size_t>& group) -> long {
    cand.clear();
    for (std::size_t a : group)
      if (state.len[vqn.activities()[a].source] > 0 && score[a] < 0.0) cand.push_back(a);
    const std::size_t pick = ties.argmin(score, cand);
    return pick == TieBreaker::npos ? -1 : static_cast<long>(pick);
  };
  for (std::size_t j = 0; j < vqn.servers(); ++j) {
    d.process[j] = choose(vqn.processing_at(j));
    d.communicate[j] = choose(vqn.communication_at(j));
  }
  return d;
}

inline DagDecision maxweight_dag(const DagVqn& vqn, const DagQueueState& state) {
  TieBreaker ties(TieBreak::lowest_index);
  return maxweight_dag(vqn, state, ties);
}

/// Q^T D z for the 0/1 allocation z encoded by `d`.
inline double dag_objective(const DagVqn& vqn, const DagQueueState& state, const DagDecision& d) {
  const auto score = dag_scores(vqn, state);
  double v = 0.0;
  for (std::size_t j = 0; j < vqn.servers(); ++j) {
    if (d.process[j] >= 0) v += score[static_cast<std::size_t>(d.process[j])];
    if (d.communicate[j] >= 0) v += score[static_cast<std::size_t>(d.communicate[j])];
  }
  return v;
}

struct DagBruteForceResult {
  DagDecision decision;
  double objective = 0.0;
};

/// Minimizes Q^T D z over every joint selection (per server: one processing
/// activity or idle, one communication activity or idle).
inline DagBruteForceResult brute_force_dag(const DagVqn& vqn, const DagQueueState& state) {
  const std::size_t J = vqn.servers();
  std::vector<std::size_t> radix;
  std::uint64_t total = 1;
  for (std::size_t j = 0; j < J; ++j) {
    radix.push_back(vqn.processing_at(j).size() + 1);
    radix.push_back(vqn.communication_at(j).size() + 1);
  }
  for (std::size_t r : radix) {
    if (total > ChainDecisionSpace::max_size / r)
      throw std::length_error("DAG decision space too large for enumeration");
    total *= r;
  }
  DagBruteForceResult best;
  best.objective = std::numeric_limits<double>::infinity();
  DagDecision d = DagDecision::idle(vqn);
  for (std::uint64_t i = 0; i < total; ++i) {
    std::uint64_t idx = i;
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t p = idx % radix[2 * j];
      idx /= radix[2 * j];
      const std::size_t c = idx % radix[2 * j + 1];
      idx /= radix[2 * j + 1];
      d.process[j] = p == 0 ? -1 : static_cast<long>(vqn.processing_at(j)[p - 1]);
      d.communicate[j] = c == 0 ? -1 : static_cast<long>(vqn.communication_at(j)[c - 1]);
    }
    const double v = dag_objective(vqn, state, d);
    if (v < best.objective) {
      best.objective = v;
      best.decision = d;
    }
  }
  return best;
}

}  // namespace dsched
