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

#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace vsmalloc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LpRow {
    std::string name;
    std::vector<std::pair<int, double>> terms;  // (variable index, coefficient)
    double rhs = 0.0;
};

// min c^T x  s.t.  eq rows: a x = b,  ub rows: a x <= b,  lower <= x <= upper.
struct LinearProgram {
    std::vector<std::string> labels;
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LpRow> eq_rows;
    std::vector<LpRow> ub_rows;

    // Returns the new variable's index. Labels must be unique and lo <= hi.
    int add_variable(const std::string& label, double lo, double hi, double c = 0.0);
    void add_equality(const std::string& name, std::vector<std::pair<int, double>> terms, double rhs);
    void add_inequality(const std::string& name, std::vector<std::pair<int, double>> terms, double rhs);

    int index_of(const std::string& label) const;
    bool has(const std::string& label) const { return label_index_.contains(label); }
    std::size_t variables() const { return labels.size(); }

    Eigen::MatrixXd eq_matrix() const;
    Eigen::VectorXd eq_rhs() const;
    Eigen::MatrixXd ub_matrix() const;
    Eigen::VectorXd ub_rhs() const;

 private:
    std::map<std::string, int> label_index_;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::kInfeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    // Optimal: inequality rows holding with equality. Infeasible: rows that
    // still need artificial support at the end of phase one.
    std::vector<std::string> binding_rows;
    int iterations = 0;

    bool optimal() const { return status == LpStatus::kOptimal; }
};

struct LpOptions {
    int max_iterations = 200000;
    double pivot_tol = 1e-9;
    double feasibility_tol = 1e-8;
};

// Two-phase dense tableau simplex with Bland's rule: the entering column is
// the lowest-index one with a negative reduced cost and ratio-test ties go to
// the lowest-index basic variable. No randomness, so equal inputs give
// bit-identical outputs.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

// Plain-text dump (variables with bounds and costs, then rows) for checking a
// problem with an external solver.
std::string dump_lp(const LinearProgram& lp);

}  // namespace vsmalloc
