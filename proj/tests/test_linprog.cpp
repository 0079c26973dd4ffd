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

#include <cmath>
#include <random>

#include "dsched/linprog.hpp"

using namespace dsched;
using lp::LinearProgram;
using lp::Status;

namespace {

// Brute-force optimum of max c.x over {A x <= b, 0 <= x <= box}: every
// vertex is the solution of n tight constraints.
double vertex_oracle(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                     const std::vector<double>& c, double box, bool& feasible) {
  const std::size_t n = c.size();
  std::vector<std::vector<double>> rows = A;
  std::vector<double> rhs = b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> lo(n, 0.0), hi(n, 0.0);
    lo[i] = -1.0;
    hi[i] = 1.0;
    rows.push_back(lo);
    rhs.push_back(0.0);
    rows.push_back(hi);
    rhs.push_back(box);
  }
  const std::size_t m = rows.size();
  double best = -INFINITY;
  feasible = false;
  std::vector<std::size_t> pick(n);
  // Enumerate n-subsets of rows.
  std::vector<bool> sel(m, false);
  std::fill(sel.begin(), sel.begin() + static_cast<long>(n), true);
  do {
    std::vector<std::vector<double>> M;
    std::vector<double> r;
    for (std::size_t i = 0; i < m; ++i)
      if (sel[i]) {
        M.push_back(rows[i]);
        r.push_back(rhs[i]);
      }
    // Gaussian elimination.
    bool singular = false;
    for (std::size_t col = 0; col < n && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t i = col + 1; i < n; ++i)
        if (std::abs(M[i][col]) > std::abs(M[piv][col])) piv = i;
      if (std::abs(M[piv][col]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(M[piv], M[col]);
      std::swap(r[piv], r[col]);
      for (std::size_t i = 0; i < n; ++i) {
        if (i == col) continue;
        const double f = M[i][col] / M[col][col];
        for (std::size_t k = col; k < n; ++k) M[i][k] -= f * M[col][k];
        r[i] -= f * r[col];
      }
    }
    if (singular) continue;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = r[i] / M[i][i];
    bool ok = true;
    for (std::size_t i = 0; i < m && ok; ++i) {
      double lhs = 0.0;
      for (std::size_t k = 0; k < n; ++k) lhs += rows[i][k] * x[k];
      if (lhs > rhs[i] + 1e-9) ok = false;
    }
    if (!ok) continue;
    feasible = true;
    double v = 0.0;
    for (std::size_t k = 0; k < n; ++k) v += c[k] * x[k];
    best = std::max(best, v);
  } while (std::prev_permutation(sel.begin(), sel.end()));
  return best;
}

}  // namespace

TEST(LinProg, TextbookTwoVariableProblem) {
  LinearProgram p(2);
  p.objective = {1, 1};
  p.add_le({{0, 1}, {1, 2}}, 4);
  p.add_le({{0, 3}, {1, 1}}, 6);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective, 2.8, 1e-12);
  EXPECT_NEAR(s.x[0], 1.6, 1e-12);
  EXPECT_NEAR(s.x[1], 1.2, 1e-12);
}

TEST(LinProg, DetectsInfeasibility) {
  LinearProgram p(1);
  p.objective = {1};
  p.add_ge({{0, 1}}, 2);
  p.add_le({{0, 1}}, 1);
  EXPECT_EQ(lp::solve(p).status, Status::infeasible);
}

TEST(LinProg, DetectsUnboundedness) {
  LinearProgram p(2);
  p.objective = {1, 0};
  p.add_le({{1, 1}}, 1);
  EXPECT_EQ(lp::solve(p).status, Status::unbounded);
}

TEST(LinProg, FreeVariableAndEqualities) {
  // max -x0 s.t. x0 - x1 = -3, x1 <= 1, x0 free  ->  x0 = -3 + x1, best x1 = 0.
  LinearProgram p(2);
  p.set_free(0);
  p.objective = {-1, 0};
  p.add_eq({{0, 1}, {1, -1}}, -3);
  p.add_le({{1, 1}}, 1);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.x[0], -3.0, 1e-12);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
}

TEST(LinProg, BoundsAreHonoured) {
  LinearProgram p(2);
  p.objective = {1, 1};
  p.lower = {-2, 1};
  p.upper = {3, 2};
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.x[0], 3.0, 1e-12);
  EXPECT_NEAR(s.x[1], 2.0, 1e-12);
  p.objective = {-1, -1};
  const auto t = lp::solve(p);
  EXPECT_NEAR(t.x[0], -2.0, 1e-12);
  EXPECT_NEAR(t.x[1], 1.0, 1e-12);
}

TEST(LinProg, RedundantEqualityRows) {
  LinearProgram p(2);
  p.objective = {1, 2};
  p.add_eq({{0, 1}, {1, 1}}, 1);
  p.add_eq({{0, 2}, {1, 2}}, 2);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective, 2.0, 1e-12);
}

TEST(LinProg, DegenerateCyclingExampleTerminates) {
  // Beale's example cycles under the textbook Dantzig rule without
  // anti-cycling safeguards. Optimum 5/4 at x = (1, 0, 1, 0).
  LinearProgram p(4);
  p.objective = {0.75, -20, 0.5, -6};
  p.add_le({{0, 0.25}, {1, -8}, {2, -1}, {3, 9}}, 0);
  p.add_le({{0, 0.5}, {1, -12}, {2, -0.5}, {3, 3}}, 0);
  p.add_le({{2, 1}}, 1);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective, 1.25, 1e-12);
  EXPECT_NEAR(s.x[0], 1.0, 1e-12);
  EXPECT_NEAR(s.x[2], 1.0, 1e-12);
}

TEST(LinProg, MatchesVertexEnumeration) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coef(-3, 3);
  int feasible_cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 2;
    const std::size_t m = 1 + trial % 5;
    std::vector<std::vector<double>> A(m, std::vector<double>(n));
    std::vector<double> b(m), c(n);
    for (auto& row : A)
      for (double& v : row) v = coef(rng);
    for (double& v : b) v = coef(rng);
    for (double& v : c) v = coef(rng);
    LinearProgram p(n);
    p.objective = c;
    p.upper.assign(n, 4.0);
    for (std::size_t i = 0; i < m; ++i) {
      lp::Terms t;
      for (std::size_t k = 0; k < n; ++k) t.push_back({k, A[i][k]});
      p.add_le(t, b[i]);
    }
    bool feasible = false;
    const double oracle = vertex_oracle(A, b, c, 4.0, feasible);
    const auto s = lp::solve(p);
    if (!feasible) {
      EXPECT_EQ(s.status, Status::infeasible) << "trial " << trial;
      continue;
    }
    ++feasible_cases;
    ASSERT_EQ(s.status, Status::optimal) << "trial " << trial;
    EXPECT_NEAR(s.objective, oracle, 1e-8) << "trial " << trial;
    EXPECT_LE(lp::max_violation(p, s.x), 1e-9);
  }
  EXPECT_GT(feasible_cases, 100);
}

TEST(LinProg, StrongDualityOnRandomPrograms) {
  // max c.x, A x <= b, x >= 0 against min b.y, A^T y >= c, y >= 0.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.1, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 4, m = 2 + trial % 5;
    std::vector<std::vector<double>> A(m, std::vector<double>(n));
    std::vector<double> b(m), c(n);
    for (auto& row : A)
      for (double& v : row) v = pos(rng);
    for (double& v : b) v = pos(rng);
    for (double& v : c) v = pos(rng);
    LinearProgram primal(n), dual(m);
    primal.objective = c;
    for (std::size_t i = 0; i < m; ++i) {
      lp::Terms t;
      for (std::size_t k = 0; k < n; ++k) t.push_back({k, A[i][k]});
      primal.add_le(t, b[i]);
      dual.objective[i] = -b[i];
    }
    for (std::size_t k = 0; k < n; ++k) {
      lp::Terms t;
      for (std::size_t i = 0; i < m; ++i) t.push_back({i, A[i][k]});
      dual.add_ge(t, c[k]);
    }
    const auto ps = lp::solve(primal), ds = lp::solve(dual);
    ASSERT_TRUE(ps.optimal());
    ASSERT_TRUE(ds.optimal());
    EXPECT_NEAR(ps.objective, -ds.objective, 1e-9);
  }
}

TEST(LinProg, SolvingIsDeterministic) {
  LinearProgram p(3);
  p.objective = {1, 1, 1};
  p.add_le({{0, 1}, {1, 1}}, 1);
  p.add_le({{1, 1}, {2, 1}}, 1);
  p.add_le({{0, 1}, {2, 1}}, 1);
  const auto a = lp::solve(p), b = lp::solve(p);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_NEAR(a.objective, 1.5, 1e-12);
}

TEST(LinProg, EmptyProgram) {
  LinearProgram p(2);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_EQ(s.objective, 0.0);
}
