// Copyright 2026 the vsm-alloc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <random>

#include "vsmalloc/error.hpp"
#include "vsmalloc/lp_kernel.hpp"

namespace vsmalloc {
namespace {

TEST(LpKernel, SingleVariableUpperBound) {
    LinearProgram lp;
    const int x = lp.add_variable("x", 0.0, kInf, -1.0);
    lp.add_inequality("cap", {{x, 1.0}}, 3.0);
    const auto sol = solve_lp(lp);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(sol.x(x), 3.0, 1e-12);
    EXPECT_NEAR(sol.objective, -3.0, 1e-12);
    EXPECT_EQ(sol.binding_rows, (std::vector<std::string>{"cap"}));
}

TEST(LpKernel, EqualityWithCheaperVariable) {
    LinearProgram lp;
    const int x = lp.add_variable("x", 0.0, kInf, 1.0);
    const int y = lp.add_variable("y", 0.0, kInf, 2.0);
    lp.add_equality("sum", {{x, 1.0}, {y, 1.0}}, 1.0);
    const auto sol = solve_lp(lp);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(sol.x(x), 1.0, 1e-12);
    EXPECT_NEAR(sol.x(y), 0.0, 1e-12);
}

TEST(LpKernel, InfeasibleReportsStatus) {
    LinearProgram lp;
    const int x = lp.add_variable("x", 0.0, kInf, 1.0);
    lp.add_inequality("below", {{x, 1.0}}, -1.0);
    const auto sol = solve_lp(lp);
    EXPECT_EQ(sol.status, LpStatus::kInfeasible);
    EXPECT_FALSE(sol.binding_rows.empty());
}

TEST(LpKernel, UnboundedReportsStatus) {
    LinearProgram lp;
    const int x = lp.add_variable("x", -kInf, kInf, -1.0);
    const int y = lp.add_variable("y", 0.0, 1.0, 0.0);
    lp.add_inequality("r", {{x, -1.0}, {y, 1.0}}, 1.0);
    EXPECT_EQ(solve_lp(lp).status, LpStatus::kUnbounded);
    EXPECT_STREQ(to_string(LpStatus::kUnbounded), "unbounded");
}

TEST(LpKernel, FreeVariableAndNegativeBounds) {
    LinearProgram lp;
    const int x = lp.add_variable("x", -kInf, kInf, 1.0);
    const int y = lp.add_variable("y", -5.0, -2.0, -1.0);
    lp.add_inequality("r", {{x, -1.0}, {y, 1.0}}, 0.5);  // x >= y - 0.5
    const auto sol = solve_lp(lp);
    ASSERT_TRUE(sol.optimal());
    // Objective x - y = -0.5 along the whole edge; any point on it is optimal.
    EXPECT_NEAR(sol.objective, -0.5, 1e-12);
    EXPECT_NEAR(sol.x(x) - sol.x(y), -0.5, 1e-12);
}

// Brute force over every vertex of a small bounded polytope.
struct DenseLp {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

double vertex_oracle(const DenseLp& p, bool& feasible) {
    const int n = static_cast<int>(p.c.size());
    const int m = static_cast<int>(p.b.size());
    // Every constraint as g^T x <= h, including the box.
    std::vector<Eigen::VectorXd> g;
    std::vector<double> h;
    for (int i = 0; i < m; ++i) {
        g.push_back(p.a.row(i).transpose());
        h.push_back(p.b(i));
    }
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e(k) = 1.0;
        g.push_back(e);
        h.push_back(p.hi(k));
        g.push_back(-e);
        h.push_back(-p.lo(k));
    }
    const int total = static_cast<int>(g.size());
    std::vector<int> pick(static_cast<std::size_t>(n));
    double best = kInf;
    feasible = false;
    std::vector<bool> mask(static_cast<std::size_t>(total), false);
    std::fill(mask.begin(), mask.begin() + n, true);
    do {
        Eigen::MatrixXd sys(n, n);
        Eigen::VectorXd rhs(n);
        int r = 0;
        for (int k = 0; k < total; ++k) {
            if (!mask[static_cast<std::size_t>(k)]) continue;
            sys.row(r) = g[static_cast<std::size_t>(k)].transpose();
            rhs(r) = h[static_cast<std::size_t>(k)];
            ++r;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
        if (lu.rank() < n) continue;
        const Eigen::VectorXd x = lu.solve(rhs);
        bool ok = true;
        for (int k = 0; k < total && ok; ++k) ok = g[static_cast<std::size_t>(k)].dot(x) <= h[static_cast<std::size_t>(k)] + 1e-9;
        if (!ok) continue;
        feasible = true;
        best = std::min(best, p.c.dot(x));
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return best;
}

LinearProgram to_lp(const DenseLp& p) {
    LinearProgram lp;
    for (Eigen::Index k = 0; k < p.c.size(); ++k)
        lp.add_variable("x" + std::to_string(k), p.lo(k), p.hi(k), p.c(k));
    for (Eigen::Index i = 0; i < p.b.size(); ++i) {
        std::vector<std::pair<int, double>> terms;
        for (Eigen::Index k = 0; k < p.c.size(); ++k) terms.emplace_back(static_cast<int>(k), p.a(i, k));
        lp.add_inequality("r" + std::to_string(i), terms, p.b(i));
    }
    return lp;
}

TEST(LpKernel, MatchesVertexEnumeration) {
    std::mt19937_64 rng(20260101);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> vars(2, 4);
    std::uniform_int_distribution<int> rows(1, 6);
    int feasible_cases = 0;
    int infeasible_cases = 0;
    for (int trial = 0; trial < 200; ++trial) {
        DenseLp p;
        const int n = vars(rng);
        const int m = rows(rng);
        p.a = Eigen::MatrixXd::NullaryExpr(m, n, [&]() { return u(rng); });
        p.b = Eigen::VectorXd::NullaryExpr(m, [&]() { return 0.8 * u(rng); });
        p.c = Eigen::VectorXd::NullaryExpr(n, [&]() { return u(rng); });
        p.lo = Eigen::VectorXd::NullaryExpr(n, [&]() { return -1.0 - u(rng) * 0.5; });
        p.hi = Eigen::VectorXd::NullaryExpr(n, [&]() { return 1.0 + u(rng) * 0.5; });
        bool feasible = false;
        const double oracle = vertex_oracle(p, feasible);
        const auto sol = solve_lp(to_lp(p));
        if (!feasible) {
            EXPECT_EQ(sol.status, LpStatus::kInfeasible) << "trial " << trial;
            ++infeasible_cases;
            continue;
        }
        ++feasible_cases;
        ASSERT_TRUE(sol.optimal()) << "trial " << trial << " " << to_string(sol.status);
        EXPECT_NEAR(sol.objective, oracle, 1e-9 * std::max(1.0, std::abs(oracle))) << "trial " << trial;
        EXPECT_LE((p.a * sol.x - p.b).maxCoeff(), 1e-9);
        EXPECT_LE((p.lo - sol.x).maxCoeff(), 1e-12);
        EXPECT_LE((sol.x - p.hi).maxCoeff(), 1e-12);
    }
    EXPECT_GT(feasible_cases, 100);
    EXPECT_GT(infeasible_cases, 0);
}

TEST(LpKernel, PlantedOptimumTwentyVariables) {
    // Build the program from a chosen primal point and chosen multipliers so
    // the optimal value is known from the KKT conditions.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 20;
        const int m = 30;
        const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(m, n, [&]() { return u(rng); });
        const Eigen::VectorXd x_star = Eigen::VectorXd::NullaryExpr(n, [&]() { return u(rng); });
        Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd b = a * x_star;
        for (int i = 0; i < m; ++i) {
            if (i < 12) {
                y(i) = pos(rng);
            } else {
                b(i) += pos(rng);
            }
        }
        // Remaining freedom goes into bounds: 8 variables pinned at a bound.
        Eigen::VectorXd lo = x_star.array() - 2.0;
        Eigen::VectorXd hi = x_star.array() + 2.0;
        Eigen::VectorXd bound_mult = Eigen::VectorXd::Zero(n);
        for (int k = 0; k < 8; ++k) {
            if (k % 2 == 0) {
                lo(k) = x_star(k);
                bound_mult(k) = pos(rng);  // c_k pushes x_k down against lo
            } else {
                hi(k) = x_star(k);
                bound_mult(k) = -pos(rng);
            }
        }
        const Eigen::VectorXd c = -a.transpose() * y + bound_mult;
        DenseLp p{a, b, c, lo, hi};
        const auto sol = solve_lp(to_lp(p));
        ASSERT_TRUE(sol.optimal()) << to_string(sol.status);
        const double want = c.dot(x_star);
        EXPECT_NEAR(sol.objective, want, 1e-8 * std::max(1.0, std::abs(want))) << "trial " << trial;
        EXPECT_LE((a * sol.x - b).maxCoeff(), 1e-8);
    }
}

TEST(LpKernel, DeterministicBitwise) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseLp p;
    p.a = Eigen::MatrixXd::NullaryExpr(15, 10, [&]() { return u(rng); });
    p.b = Eigen::VectorXd::NullaryExpr(15, [&]() { return 0.5 + u(rng); });
    p.c = Eigen::VectorXd::NullaryExpr(10, [&]() { return u(rng); });
    p.lo = Eigen::VectorXd::Constant(10, -3.0);
    p.hi = Eigen::VectorXd::Constant(10, 3.0);
    const auto lp = to_lp(p);
    const auto first = solve_lp(lp);
    const auto second = solve_lp(lp);
    ASSERT_TRUE(first.optimal());
    EXPECT_EQ(0, std::memcmp(first.x.data(), second.x.data(), sizeof(double) * 10));
    EXPECT_EQ(first.iterations, second.iterations);
    EXPECT_EQ(first.binding_rows, second.binding_rows);
}

TEST(LpKernel, DumpListsEverything) {
    LinearProgram lp;
    const int x = lp.add_variable("dm[1]", -0.5, 0.5, 0.25);
    lp.add_equality("balance", {{x, 1.0}}, 0.125);
    lp.add_inequality("keep", {{x, -2.0}}, 1.0);
    const std::string text = dump_lp(lp);
    EXPECT_NE(text.find("dm[1] lower=-0.5 upper=0.5 cost=0.25"), std::string::npos) << text;
    EXPECT_NE(text.find("balance: 1*dm[1] = 0.125"), std::string::npos) << text;
    EXPECT_NE(text.find("keep: -2*dm[1] <= 1"), std::string::npos) << text;
}

TEST(LpKernel, RejectsBadInput) {
    LinearProgram lp;
    lp.add_variable("x", 0.0, 1.0);
    EXPECT_THROW(lp.add_variable("x", 0.0, 1.0), InputError);
    EXPECT_THROW(lp.add_variable("y", 2.0, 1.0), InputError);
    EXPECT_THROW(lp.index_of("missing"), InputError);
    EXPECT_EQ(lp.index_of("x"), 0);
    EXPECT_THROW(
        {
            lp.add_inequality("bad", {{7, 1.0}}, 0.0);
            solve_lp(lp);
        },
        InputError);
}

}  // namespace
}  // namespace vsmalloc
