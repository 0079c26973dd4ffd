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

// Instance files (JSON, 1-based task ids) and result writers. Numbers are
// written in shortest round-trip form.

#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dsched/capacity.hpp"
#include "dsched/model.hpp"
#include "dsched/sim.hpp"

namespace dsched {

using json = nlohmann::json;

/// Malformed or ill-typed input file.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(where + " is missing \"" + key + "\"");
  return *it;
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw InputError(where + " must be a number");
  return v.get<double>();
}

inline const json& array(const json& v, const std::string& where) {
  if (!v.is_array()) throw InputError(where + " must be an array");
  return v;
}

}  // namespace detail

/// Parses an instance. Syntax errors report line and column; structural
/// problems are left to validate().
inline Instance parse_instance(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is one past the offending character
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, col] = detail::line_column(text, at);
    std::string msg = e.what();
    if (auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
    throw InputError("malformed JSON at line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": " + msg);
  }

  Instance inst;
  const auto& jobs = detail::array(detail::field(doc, "jobs", "instance"), "jobs");
  for (std::size_t m = 0; m < jobs.size(); ++m) {
    const std::string where = "jobs[" + std::to_string(m) + "]";
    const auto& type = detail::field(jobs[m], "type", where);
    if (!type.is_string() || (type != "chain" && type != "dag"))
      throw InputError(where + ".type must be \"chain\" or \"dag\"");
    const auto& tasks = detail::array(detail::field(jobs[m], "tasks", where), where + ".tasks");
    std::vector<double> sizes;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const std::string tw = where + ".tasks[" + std::to_string(i) + "]";
      sizes.push_back(detail::number(detail::field(tasks[i], "c", tw), tw + ".c"));
    }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    const bool has_edges = jobs[m].contains("edges");
    if (has_edges) {
      const auto& list = detail::array(jobs[m]["edges"], where + ".edges");
      for (std::size_t e = 0; e < list.size(); ++e) {
        const std::string ew = where + ".edges[" + std::to_string(e) + "]";
        const auto& pair = detail::array(list[e], ew);
        if (pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number_integer())
          throw InputError(ew + " must be a pair of task ids");
        const auto a = pair[0].get<long long>(), b = pair[1].get<long long>();
        if (a < 1 || b < 1) throw InputError(ew + " uses ids below 1 (ids are 1-based)");
        edges.emplace_back(static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));
      }
    }
    if (type == "chain") {
      Job job = Job::chain(sizes);
      if (has_edges) job.edges = edges;  // validate() checks they match k -> k+1
      inst.jobs.push_back(std::move(job));
    } else {
      inst.jobs.push_back(Job::dag(sizes, edges));
    }
  }

  const auto& servers = detail::field(doc, "servers", "instance");
  const auto& mu = detail::array(detail::field(servers, "mu", "servers"), "servers.mu");
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const std::string rw = "servers.mu[" + std::to_string(k) + "]";
    std::vector<double> row;
    for (std::size_t j = 0; j < detail::array(mu[k], rw).size(); ++j)
      row.push_back(detail::number(mu[k][j], rw + "[" + std::to_string(j) + "]"));
    inst.net.mu.push_back(std::move(row));
  }
  const auto& b = detail::array(detail::field(servers, "b", "servers"), "servers.b");
  for (std::size_t j = 0; j < b.size(); ++j)
    inst.net.bandwidth.push_back(detail::number(b[j], "servers.b[" + std::to_string(j) + "]"));
  const auto& lambda = detail::array(detail::field(doc, "lambda", "instance"), "lambda");
  for (std::size_t m = 0; m < lambda.size(); ++m)
    inst.lambda.push_back(detail::number(lambda[m], "lambda[" + std::to_string(m) + "]"));
  return inst;
}

inline Instance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open instance file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance(buf.str());
}

inline json instance_to_json(const Instance& inst) {
  json doc;
  doc["jobs"] = json::array();
  for (const auto& job : inst.jobs) {
    json j;
    j["type"] = job.is_chain() ? "chain" : "dag";
    j["tasks"] = json::array();
    for (double c : job.out_size) j["tasks"].push_back({{"c", c}});
    j["edges"] = json::array();
    for (const auto& [a, b] : job.edges) j["edges"].push_back({a + 1, b + 1});
    doc["jobs"].push_back(std::move(j));
  }
  doc["servers"]["mu"] = inst.net.mu;
  doc["servers"]["b"] = inst.net.bandwidth;
  doc["lambda"] = inst.lambda;
  return doc;
}

inline json spp_to_json(const SppResult& r) {
  return {{"status", lp::to_string(r.status)},
          {"delta_star", r.delta_star},
          {"in_region", r.in_region},
          {"p", r.p},
          {"q", r.q}};
}

inline json bpp_to_json(const BppResult& r) {
  return {{"status", lp::to_string(r.status)},
          {"eta_star", r.eta_star},
          {"in_region", r.in_region},
          {"z", r.z}};
}

inline json allocation_to_json(const AllocationVectors& a) {
  return {{"u", a.u}, {"s", a.s}, {"w", a.w}, {"r", a.r}, {"r_c", a.r_c}};
}

inline json verdict_to_json(const StabilityVerdict& v) {
  return {{"qn_over_n", v.qn_over_n}, {"slope", v.slope}, {"verdict", to_string(v.verdict)}};
}

/// `theta_1,...,theta_M,c_star,delta_star`, plus a trailing `model` column
/// when `with_model` is set.
inline void write_boundary_csv(std::ostream& os, const std::vector<BoundaryPoint>& points,
                               std::size_t jobs, bool with_model = false) {
  for (std::size_t m = 0; m < jobs; ++m) os << "theta_" << m + 1 << ',';
  os << "c_star,delta_star" << (with_model ? ",model" : "") << '\n';
  for (const auto& p : points) {
    for (double t : p.theta) os << format_double(t) << ',';
    os << format_double(p.c_star) << ',' << format_double(p.delta_star);
    if (with_model) os << ',' << (p.with_comm ? "with_comm" : "no_comm");
    os << '\n';
  }
}

/// `slot,total_q,total_qc,arrivals,departures` with cumulative job counts.
inline void write_trace_csv(std::ostream& os, const SimTrace& t) {
  os << "slot,total_q,total_qc,arrivals,departures\n";
  for (std::size_t n = 0; n < t.total_q.size(); ++n)
    os << n + 1 << ',' << t.total_q[n] << ',' << t.total_qc[n] << ',' << t.arrivals[n] << ','
       << t.departures[n] << '\n';
}

inline json trace_summary_json(const SimTrace& t, const StabilityVerdict& v) {
  json s = verdict_to_json(v);
  s["seed"] = t.seed;
  s["horizon"] = t.horizon;
  s["lambda_sum"] = t.lambda_sum;
  s["arrivals_by_type"] = t.arrivals_by_type;
  s["departures_by_type"] = t.departures_by_type;
  s["final_queue_lengths"] = t.final_len;
  s["mean_queue_lengths"] = t.mean_len;
  return s;
}

}  // namespace dsched
