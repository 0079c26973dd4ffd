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
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dsched/dsched.hpp"

using dsched::json;

namespace {

const std::string data_dir = DSCHED_DATA_DIR;

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(DSCHED_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& name) { return data_dir + "/" + name; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dsched_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("capacity-spp").code, 2);
  EXPECT_EQ(cli("no-such-command --instance x").code, 2);
  EXPECT_EQ(cli("capacity-spp --instance /nonexistent.json").code, 2);
}

TEST(Cli, MalformedJsonExitsTwo) {
  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{\"jobs\": [\n";
  EXPECT_EQ(cli("validate --instance " + bad.string()).code, 2);
}

TEST(Cli, ValidateReportsFlags) {
  const auto r = cli("validate --instance " + data("two_chains.json"));
  EXPECT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc["valid_for_capacity"].get<bool>());
  EXPECT_FALSE(doc["valid_for_simulation"].get<bool>());  // rates above one per slot
  EXPECT_EQ(cli("validate --strict --instance " + data("two_chains.json")).code, 2);
}

TEST(Cli, SingleTaskSpp) {
  const auto r = cli("capacity-spp --instance " + data("single_task.json"));
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  EXPECT_NEAR(doc["delta_star"].get<double>(), 0.2, 1e-9);
  EXPECT_TRUE(doc["in_region"].get<bool>());
}

TEST(Cli, DagRejectedByChainCommands) {
  EXPECT_EQ(cli("capacity-spp --instance " + data("diamond_dag.json")).code, 2);
  EXPECT_EQ(cli("construct-allocation --instance " + data("diamond_dag.json")).code, 2);
}

TEST(Cli, SweepRowCounts) {
  const auto one = cli("capacity-sweep --direction 0.5,0.5 --instance " + data("two_chains.json"));
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(lines(one.out), 2u);
  const auto all = cli("capacity-sweep --instance " + data("two_chains.json"));
  EXPECT_EQ(lines(all.out), 65u);
  const auto cmp = cli("capacity-sweep --compare --instance " + data("two_chains.json"));
  EXPECT_EQ(lines(cmp.out), 129u);
  EXPECT_EQ(cmp.out.substr(0, cmp.out.find('\n')), "theta_1,theta_2,c_star,delta_star,model");
}

TEST(Cli, BppAndStagesOnTheDiamond) {
  const auto bpp = cli("capacity-bpp --instance " + data("diamond_dag.json"));
  ASSERT_EQ(bpp.code, 0);
  EXPECT_TRUE(json::parse(bpp.out)["in_region"].get<bool>());
  const auto st = cli("stages --instance " + data("diamond_dag.json"));
  EXPECT_EQ(st.out, "{1,2,3,4}\n{2,3,4}\n{2,4}\n{3,4}\n{4}\n");
}

TEST(Cli, ConstructAllocation) {
  const auto r = cli("construct-allocation --instance " + data("two_chains.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["qnpp_member"].get<bool>());
}

TEST(Cli, SimulateIsByteReproducible) {
  const auto a = scratch("a.csv"), b = scratch("b.csv"), sa = scratch("a.json"),
             sb = scratch("b.json");
  const std::string common =
      "simulate --headroom 0.9 --horizon 5000 --seed 7 --instance " + data("two_chains.json");
  ASSERT_EQ(cli(common + " --out " + a.string() + " --summary " + sa.string()).code, 0);
  ASSERT_EQ(cli(common + " --out " + b.string() + " --summary " + sb.string()).code, 0);
  const auto ta = slurp(a);
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, slurp(b));
  EXPECT_EQ(slurp(sa), slurp(sb));
  EXPECT_EQ(lines(ta), 5001u);
}

TEST(Cli, SimulateNeedsHeadroomForFastInstances) {
  EXPECT_EQ(cli("simulate --horizon 100 --instance " + data("two_chains.json")).code, 2);
  EXPECT_EQ(cli("simulate --horizon 100 --instance " + data("single_task.json")).code, 0);
  EXPECT_EQ(cli("simulate --horizon 100 --policy nope --instance " + data("single_task.json")).code,
            2);
}

TEST(Cli, SweepSimulateSeparatesInsideFromOutside) {
  const auto r = cli("sweep-simulate --fractions 0.5,0.8,1.3,1.6 --horizon 200000 --instance " +
                     data("two_chains.json"));
  ASSERT_EQ(r.code, 0);
  const auto doc = json::parse(r.out);
  const auto& pts = doc["points"];
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0]["verdict"], "stable-evidence");
  EXPECT_EQ(pts[1]["verdict"], "stable-evidence");
  EXPECT_EQ(pts[2]["verdict"], "unstable-evidence");
  EXPECT_EQ(pts[3]["verdict"], "unstable-evidence");
}

TEST(Cli, SweepSimulateNeedsFractions) {
  EXPECT_EQ(cli("sweep-simulate --instance " + data("two_chains.json")).code, 2);
  EXPECT_EQ(cli("sweep-simulate --fractions= --instance " + data("two_chains.json")).code, 2);
  EXPECT_EQ(cli("sweep-simulate --fractions -1 --instance " + data("two_chains.json")).code, 2);
}

TEST(Cli, StrictFlagsInconclusiveRuns) {
  // A short horizon near the boundary: whatever the verdict, --strict exits 4
  // exactly when it is inconclusive.
  const auto summary = scratch("strict.json");
  const auto trace = scratch("strict.csv");
  const auto r = cli("simulate --strict --headroom 0.9 --horizon 300 --seed 3 --out " +
                     trace.string() + " --summary " + summary.string() + " --instance " +
                     data("two_chains.json"));
  const auto verdict = json::parse(slurp(summary))["verdict"].get<std::string>();
  EXPECT_EQ(r.code == 4, verdict == "inconclusive");
  EXPECT_TRUE(r.code == 0 || r.code == 4);
}
