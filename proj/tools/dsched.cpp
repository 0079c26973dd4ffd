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

// dsched: capacity analysis and simulation front end.
//
// Exit codes: 0 success, 2 invalid input or usage, 3 numeric failure,
// 4 inconclusive stability verdict under --strict.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsched/dsched.hpp"

namespace {

using namespace dsched;

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_numeric = 3;
constexpr int exit_inconclusive = 4;

struct Options {
  std::string instance;
  std::string out;
  std::string summary;
  std::uint64_t seed = 1;
  std::int64_t horizon = 100'000;
  std::size_t directions = 64;
  double headroom = 0.0;
  std::vector<double> fractions;
  std::vector<double> direction;
  std::string tie_break = "random";
  std::string policy = "maxweight";
  double warmup = 0.2;
  std::size_t replications = 1;
  bool strict = false;
  bool no_comm = false;
  bool compare = false;
  bool allow_chains = false;
};

// Writes to --out when given, stdout otherwise.
void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw InputError("cannot write " + o.out);
  f << text;
}

Instance load_checked(const Options& o) {
  Instance inst = load_instance(o.instance);
  const auto report = validate(inst);
  if (!report.valid_for_capacity()) throw InputError("invalid instance:\n" + report.summary());
  return inst;
}

TieBreak parse_tie_break(const std::string& s) {
  if (s == "random") return TieBreak::random;
  if (s == "lowest-index") return TieBreak::lowest_index;
  throw InputError("--tie-break must be random or lowest-index");
}

PolicyKind parse_policy(const std::string& s) {
  if (s == "maxweight") return PolicyKind::maxweight;
  if (s == "brute-force") return PolicyKind::brute_force;
  if (s == "static-allocation") return PolicyKind::static_allocation;
  throw InputError("--policy must be maxweight, brute-force or static-allocation");
}

SimConfig sim_config(const Options& o) {
  SimConfig c;
  c.horizon = o.horizon;
  c.seed = o.seed;
  c.warmup = o.warmup;
  c.tie_break = parse_tie_break(o.tie_break);
  c.policy = parse_policy(o.policy);
  c.replications = o.replications;
  check_config(c);
  return c;
}

// Rescales when --headroom is given; otherwise the instance must already be
// simulable.
RescaleReport prepare_for_simulation(const Instance& inst, const Options& o) {
  if (o.headroom > 0.0) return rescale_for_simulation(inst, o.headroom);
  const auto report = validate(inst);
  if (!report.valid_for_simulation())
    throw InputError("instance is not simulable as given; pass --headroom (e.g. 0.9) to rescale "
                     "the clock:\n" +
                     report.summary());
  return {1.0, inst};
}

SimTrace run_one(const Instance& inst, const SimConfig& cfg) {
  if (cfg.policy == PolicyKind::static_allocation) {
    const auto plan = plan_static_allocation(inst, inst.lambda);
    return run_static_allocation(inst, plan.alloc, plan.balanced.p, plan.balanced.q, cfg);
  }
  return simulate(inst, cfg);
}

int cmd_validate(const Options& o) {
  const Instance inst = load_instance(o.instance);
  const auto report = validate(inst);
  json doc;
  doc["valid_for_capacity"] = report.valid_for_capacity();
  doc["valid_for_simulation"] = report.valid_for_simulation();
  doc["issues"] = json::array();
  for (const auto& issue : report.issues)
    doc["issues"].push_back(
        {{"scope", issue.scope == ValidationIssue::Scope::structure ? "structure" : "simulation"},
         {"message", issue.message}});
  emit(o, doc.dump(2) + "\n");
  if (!report.valid_for_capacity()) return exit_input;
  if (o.strict && !report.valid_for_simulation()) return exit_input;
  return exit_ok;
}

int cmd_spp(const Options& o) {
  const Instance inst = load_checked(o);
  const auto r = o.no_comm ? solve_spp_nocomm(inst) : solve_spp(inst);
  json doc = spp_to_json(r);
  doc["with_comm"] = !o.no_comm;
  doc["lambda"] = inst.lambda;
  emit(o, doc.dump(2) + "\n");
  return exit_ok;
}

int cmd_sweep(const Options& o) {
  const Instance inst = load_checked(o);
  if (o.directions == 0) throw InputError("--directions must be positive");
  std::vector<std::vector<double>> dirs;
  if (!o.direction.empty())
    dirs.push_back(o.direction);
  else
    dirs = simplex_directions(inst.job_count(), o.directions, o.seed);
  std::vector<BoundaryPoint> pts;
  for (const auto& d : dirs) {
    pts.push_back(boundary_point(inst, d, !o.no_comm));
    if (o.compare) pts.push_back(boundary_point(inst, d, false));
  }
  std::ostringstream os;
  write_boundary_csv(os, pts, inst.job_count(), o.compare);
  emit(o, os.str());
  return exit_ok;
}

int cmd_bpp(const Options& o) {
  const Instance inst = load_checked(o);
  const auto r = solve_bpp(inst, inst.lambda, o.allow_chains);
  json doc = bpp_to_json(r);
  doc["lambda"] = inst.lambda;
  emit(o, doc.dump(2) + "\n");
  return exit_ok;
}

int cmd_construct(const Options& o) {
  const Instance inst = load_checked(o);
  const auto bal = balanced_spp(inst);
  const auto alloc = construct_allocation(inst, inst.lambda, bal.p, bal.q);
  const auto check = verify_qnpp_membership(inst, inst.lambda, alloc, bal.p, bal.q);
  json doc;
  doc["p"] = bal.p;
  doc["q"] = bal.q;
  doc["min_bandwidth_slack"] = bal.delta_star;
  doc["allocation"] = allocation_to_json(alloc);
  doc["qnpp_member"] = check.ok;
  doc["max_residual"] = check.max_residual;
  doc["violations"] = check.violations;
  emit(o, doc.dump(2) + "\n");
  return check.ok ? exit_ok : exit_numeric;
}

int cmd_stages(const Options& o) {
  const Instance inst = load_checked(o);
  std::ostringstream os;
  for (std::size_t m = 0; m < inst.job_count(); ++m) {
    if (inst.job_count() > 1) os << "# job " << m + 1 << '\n';
    for (const auto& s : enumerate_stages(inst.jobs[m], m)) os << format_stage(s) << '\n';
  }
  emit(o, os.str());
  return exit_ok;
}

int cmd_simulate(const Options& o) {
  const Instance inst = load_checked(o);
  const SimConfig cfg = sim_config(o);
  const auto scaled = prepare_for_simulation(inst, o);
  const SimTrace trace = run_one(scaled.scaled, cfg);
  const auto verdict = assess_stability(trace, cfg.warmup);
  json summary = trace_summary_json(trace, verdict);
  summary["policy"] = to_string(cfg.policy);
  summary["tie_break"] = to_string(cfg.tie_break);
  summary["rescale_factor"] = scaled.factor;
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  if (o.out.empty()) {
    std::cout << summary.dump(2) << '\n';
  } else {
    emit(o, csv.str());
    if (o.summary.empty()) std::cout << summary.dump(2) << '\n';
  }
  if (!o.summary.empty()) {
    std::ofstream f(o.summary, std::ios::binary);
    if (!f) throw InputError("cannot write " + o.summary);
    f << summary.dump(2) << '\n';
  }
  return o.strict && verdict.verdict == Verdict::inconclusive ? exit_inconclusive : exit_ok;
}

int cmd_sweep_simulate(const Options& o) {
  if (o.fractions.empty()) throw CLI::ValidationError("--fractions", "at least one fraction required");
  const Instance inst = load_checked(o);
  SimConfig cfg = sim_config(o);
  const double headroom = o.headroom > 0.0 ? o.headroom : 0.9;
  const auto scaled = rescale_for_simulation(inst, headroom);
  const Instance& base = scaled.scaled;

  std::vector<double> theta = o.direction.empty() ? base.lambda : o.direction;
  if (theta.size() != base.job_count()) throw InputError("--direction needs one entry per job");
  double c_star = 0.0;
  std::vector<double> unit;
  if (base.all_chains()) {
    const auto bp = boundary_point(base, theta, true);
    c_star = bp.c_star;
    unit = bp.theta;
  } else {
    double sum = 0.0;
    for (double v : theta) sum += v;
    if (!(sum > 0.0)) throw InputError("direction must have positive mass");
    for (double v : theta) unit.push_back(v / sum);
    const auto r = solve_bpp(base, unit, true);
    c_star = 1.0 / r.eta_star;
  }

  json doc;
  doc["rescale_factor"] = scaled.factor;
  doc["theta"] = unit;
  doc["c_star"] = c_star;
  doc["policy"] = to_string(cfg.policy);
  doc["horizon"] = cfg.horizon;
  doc["points"] = json::array();
  bool inconclusive = false;
  for (double f : o.fractions) {
    if (!(f > 0.0)) throw InputError("fractions must be positive");
    Instance at = base;
    for (std::size_t m = 0; m < at.job_count(); ++m) at.lambda[m] = f * c_star * unit[m];
    json point;
    point["fraction"] = f;
    point["lambda"] = at.lambda;
    const auto report = validate(at);
    if (!report.valid_for_simulation()) {
      point["skipped"] = report.summary();
      inconclusive = true;
      doc["points"].push_back(point);
      continue;
    }
    const auto traces = replicate(cfg, [&](const SimConfig& c) { return run_one(at, c); });
    const auto v = assess_stability(traces, cfg.warmup);
    point.update(verdict_to_json(v));
    point["seeds"] = json::array();
    for (const auto& t : traces) point["seeds"].push_back(t.seed);
    inconclusive = inconclusive || v.verdict == Verdict::inconclusive;
    doc["points"].push_back(point);
  }
  emit(o, doc.dump(2) + "\n");
  return o.strict && inconclusive ? exit_inconclusive : exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsched: capacity regions, virtual queueing networks and Max-Weight simulation"};
  app.require_subcommand(1);
  Options o;

  std::map<CLI::App*, std::function<int(const Options&)>> handlers;
  auto add = [&](const std::string& name, const std::string& help,
                 std::function<int(const Options&)> fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--instance", o.instance, "instance JSON file")->required();
    sub->add_option("--out", o.out, "output file (stdout when omitted)");
    sub->add_flag("--strict", o.strict, "exit 4 on inconclusive verdicts");
    handlers[sub] = std::move(fn);
    return sub;
  };

  add("validate", "check an instance file", cmd_validate);
  auto* spp = add("capacity-spp", "solve the static planning LP for a chain instance", cmd_spp);
  spp->add_flag("--no-comm", o.no_comm, "drop the communication constraints");
  auto* sweep = add("capacity-sweep", "trace the capacity boundary along directions", cmd_sweep);
  sweep->add_option("--directions", o.directions, "number of directions")->capture_default_str();
  sweep->add_option("--direction", o.direction, "single direction (comma separated)")
      ->delimiter(',');
  sweep->add_option("--seed", o.seed, "seed for random directions (three or more jobs)");
  sweep->add_flag("--no-comm", o.no_comm, "sweep the region without communication constraints");
  sweep->add_flag("--compare", o.compare,
                  "emit both models per direction, with a trailing model column");
  auto* bpp = add("capacity-bpp", "solve the broadcast planning LP for a DAG instance", cmd_bpp);
  bpp->add_flag("--allow-chains", o.allow_chains, "treat chain jobs as DAGs");
  add("construct-allocation", "build routing fractions from a balanced allocation",
      cmd_construct);
  add("stages", "list the stages of every DAG job", cmd_stages);

  auto sim_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
    sub->add_option("--horizon", o.horizon, "number of slots")->capture_default_str();
    sub->add_option("--headroom", o.headroom, "rescale so every per-slot rate is at most this");
    sub->add_option("--tie-break", o.tie_break, "random | lowest-index")->capture_default_str();
    sub->add_option("--policy", o.policy, "maxweight | brute-force | static-allocation")
        ->capture_default_str();
    sub->add_option("--warmup", o.warmup, "fraction of slots skipped by the slope fit")
        ->capture_default_str();
  };
  auto* sim = add("simulate", "simulate one instance; --out receives the trace CSV", cmd_simulate);
  sim_flags(sim);
  sim->add_option("--summary", o.summary, "summary JSON file");
  auto* ss = add("sweep-simulate", "simulate at fractions of a boundary point",
                 cmd_sweep_simulate);
  sim_flags(ss);
  ss->add_option("--fractions", o.fractions, "fractions of the boundary point")
      ->delimiter(',')
      ->required();
  ss->add_option("--direction", o.direction, "direction (defaults to lambda)")->delimiter(',');
  ss->add_option("--replications", o.replications, "replications per fraction")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_input;
  }

  for (auto& [sub, fn] : handlers) {
    if (!sub->parsed()) continue;
    try {
      return fn(o);
    } catch (const CLI::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_input;
    } catch (const InputError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_input;
    } catch (const NumericError& e) {
      std::cerr << "numeric failure: " << e.what() << '\n';
      return exit_numeric;
    } catch (const BalanceInfeasible& e) {
      std::cerr << "numeric failure: " << e.what() << '\n';
      return exit_numeric;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_input;
    } catch (const std::length_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_input;
    } catch (const std::exception& e) {
      std::cerr << "internal error: " << e.what() << '\n';
      return 1;
    }
  }
  return exit_input;
}
