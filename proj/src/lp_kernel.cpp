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

#include "vsmalloc/lp_kernel.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <sstream>

#include "vsmalloc/error.hpp"
#include "vsmalloc/simd/kernels.hpp"

namespace vsmalloc {

int LinearProgram::add_variable(const std::string& label, double lo, double hi, double c) {
    if (label_index_.contains(label)) throw InputError("LP variable label '" + label + "' is not unique");
    if (!(lo <= hi)) throw InputError("LP variable '" + label + "' has lower bound above upper bound");
    if (std::isnan(c)) throw InputError("LP variable '" + label + "' has a NaN cost");
    const int index = static_cast<int>(labels.size());
    labels.push_back(label);
    lower.push_back(lo);
    upper.push_back(hi);
    cost.push_back(c);
    label_index_.emplace(label, index);
    return index;
}

namespace {

void check_row(const LinearProgram& lp, const LpRow& row) {
    for (const auto& [var, coef] : row.terms) {
        if (var < 0 || static_cast<std::size_t>(var) >= lp.variables())
            throw InputError("LP row '" + row.name + "' references an unknown variable");
        if (!std::isfinite(coef)) throw InputError("LP row '" + row.name + "' has a non-finite coefficient");
    }
    if (!std::isfinite(row.rhs)) throw InputError("LP row '" + row.name + "' has a non-finite right-hand side");
}

Eigen::MatrixXd dense(const std::vector<LpRow>& rows, std::size_t vars) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vars));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (const auto& [var, coef] : rows[r].terms) out(static_cast<Eigen::Index>(r), var) += coef;
    return out;
}

Eigen::VectorXd rhs_of(const std::vector<LpRow>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = rows[r].rhs;
    return out;
}

}  // namespace

void LinearProgram::add_equality(const std::string& name, std::vector<std::pair<int, double>> terms, double rhs) {
    eq_rows.push_back({name, std::move(terms), rhs});
    check_row(*this, eq_rows.back());
}

void LinearProgram::add_inequality(const std::string& name, std::vector<std::pair<int, double>> terms, double rhs) {
    ub_rows.push_back({name, std::move(terms), rhs});
    check_row(*this, ub_rows.back());
}

int LinearProgram::index_of(const std::string& label) const {
    auto it = label_index_.find(label);
    if (it == label_index_.end()) throw InputError("LP has no variable '" + label + "'");
    return it->second;
}

Eigen::MatrixXd LinearProgram::eq_matrix() const { return dense(eq_rows, variables()); }
Eigen::VectorXd LinearProgram::eq_rhs() const { return rhs_of(eq_rows); }
Eigen::MatrixXd LinearProgram::ub_matrix() const { return dense(ub_rows, variables()); }
Eigen::VectorXd LinearProgram::ub_rhs() const { return rhs_of(ub_rows); }

const char* to_string(LpStatus status) {
    switch (status) {
        case LpStatus::kOptimal:
            return "optimal";
        case LpStatus::kInfeasible:
            return "infeasible";
        case LpStatus::kUnbounded:
            return "unbounded";
        case LpStatus::kIterationLimit:
            return "iteration-limit";
    }
    return "?";
}

namespace {

// Original variable x_k = offset + sum(sign * y_col) over its standard-form columns.
struct VarMap {
    double offset = 0.0;
    std::vector<std::pair<int, double>> cols;
};

struct StdRow {
    std::string name;
    std::vector<double> coef;  // over standard-form columns
    double rhs = 0.0;
    bool equality = false;
};

class Tableau {
 public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double* row(std::size_t r) { return &data_[r * (cols_ + 1)]; }
    // Row `rows_` holds reduced costs; its last entry is minus the objective.
    std::size_t objective_row() const { return rows_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    void pivot(std::size_t pr, std::size_t pc) {
        const std::size_t width = cols_ + 1;
        double* prow = row(pr);
        const double inv = 1.0 / prow[pc];
        for (std::size_t c = 0; c < width; ++c) prow[c] *= inv;
        prow[pc] = 1.0;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr) continue;
            double* target = row(r);
            const double factor = target[pc];
            if (factor == 0.0) continue;
            simd::axpy(-factor, prow, target, width);
            target[pc] = 0.0;
        }
    }

 private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

enum class PhaseResult { kOptimal, kUnbounded, kIterationLimit };

// Bland's rule iterations on the current objective row. Columns at or beyond
// `allowed_cols` never enter.
PhaseResult run_simplex(Tableau& t, std::vector<int>& basis, std::size_t allowed_cols, double dual_tol,
                        const LpOptions& opt, int& iterations) {
    const std::size_t obj = t.objective_row();
    while (true) {
        if (iterations >= opt.max_iterations) return PhaseResult::kIterationLimit;
        bool pivoted = false;
        for (std::size_t enter = 0; enter < allowed_cols && !pivoted; ++enter) {
            const double reduced = t.at(obj, enter);
            if (reduced >= -dual_tol) continue;

            std::size_t leave = t.rows();
            double best_ratio = kInf;
            for (std::size_t r = 0; r < t.rows(); ++r) {
                const double a = t.at(r, enter);
                if (a <= opt.pivot_tol) continue;
                const double ratio = t.rhs(r) / a;
                if (leave == t.rows() || ratio < best_ratio - 1e-12) {
                    best_ratio = ratio;
                    leave = r;
                } else if (ratio <= best_ratio + 1e-12 && basis[r] < basis[leave]) {
                    leave = r;
                }
            }
            if (leave == t.rows()) {
                // A column whose entries are all round-off is skipped; a
                // genuine improving ray means the program is unbounded.
                double largest = 0.0;
                for (std::size_t r = 0; r < t.rows(); ++r) largest = std::max(largest, std::abs(t.at(r, enter)));
                if (largest > opt.pivot_tol || reduced < -1e3 * dual_tol) return PhaseResult::kUnbounded;
                continue;
            }
            t.pivot(leave, enter);
            basis[leave] = static_cast<int>(enter);
            ++iterations;
            pivoted = true;
        }
        if (!pivoted) return PhaseResult::kOptimal;
    }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opt) {
    const std::size_t nvar = lp.variables();
    LpSolution sol;
    sol.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nvar));

    // Map every variable onto non-negative standard-form columns.
    std::vector<VarMap> vmap(nvar);
    std::vector<std::pair<std::size_t, double>> upper_rows;  // (variable, bound) rows y <= bound
    std::size_t ncol = 0;
    for (std::size_t k = 0; k < nvar; ++k) {
        const double lo = lp.lower[k];
        const double hi = lp.upper[k];
        if (lo == hi) {
            vmap[k].offset = lo;
        } else if (std::isfinite(lo)) {
            vmap[k].offset = lo;
            vmap[k].cols.emplace_back(static_cast<int>(ncol), 1.0);
            if (std::isfinite(hi)) upper_rows.emplace_back(k, hi - lo);
            ++ncol;
        } else if (std::isfinite(hi)) {
            vmap[k].offset = hi;
            vmap[k].cols.emplace_back(static_cast<int>(ncol++), -1.0);
        } else {
            vmap[k].cols.emplace_back(static_cast<int>(ncol++), 1.0);
            vmap[k].cols.emplace_back(static_cast<int>(ncol++), -1.0);
        }
    }

    std::vector<StdRow> rows;
    auto translate = [&](const LpRow& row, bool equality) {
        StdRow out{row.name, std::vector<double>(ncol, 0.0), row.rhs, equality};
        for (const auto& [var, coef] : row.terms) {
            out.rhs -= coef * vmap[static_cast<std::size_t>(var)].offset;
            for (const auto& [col, sign] : vmap[static_cast<std::size_t>(var)].cols)
                out.coef[static_cast<std::size_t>(col)] += coef * sign;
        }
        rows.push_back(std::move(out));
    };
    for (const auto& row : lp.eq_rows) translate(row, true);
    for (const auto& row : lp.ub_rows) translate(row, false);
    for (const auto& [var, bound] : upper_rows) {
        StdRow out{"upper:" + lp.labels[var], std::vector<double>(ncol, 0.0), bound, false};
        out.coef[static_cast<std::size_t>(vmap[var].cols.front().first)] = 1.0;
        rows.push_back(std::move(out));
    }

    // Columns: structural, then one slack per inequality, then artificials.
    const std::size_t m = rows.size();
    std::size_t nslack = 0;
    for (const auto& r : rows) nslack += r.equality ? 0 : 1;
    std::vector<int> artificial_row;
    std::vector<bool> needs_artificial(m, false);
    for (std::size_t i = 0; i < m; ++i) {
        needs_artificial[i] = rows[i].equality || rows[i].rhs < 0.0;
        if (needs_artificial[i]) artificial_row.push_back(static_cast<int>(i));
    }
    const std::size_t first_art = ncol + nslack;
    const std::size_t total_cols = first_art + artificial_row.size();

    Tableau t(m, total_cols);
    std::vector<int> basis(m, -1);
    std::size_t slack_col = ncol;
    std::size_t art_col = first_art;
    for (std::size_t i = 0; i < m; ++i) {
        const double sign = rows[i].rhs < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < ncol; ++c) t.at(i, c) = sign * rows[i].coef[c];
        t.rhs(i) = sign * rows[i].rhs;
        if (!rows[i].equality) {
            t.at(i, slack_col) = sign;
            if (!needs_artificial[i]) basis[i] = static_cast<int>(slack_col);
            ++slack_col;
        }
        if (needs_artificial[i]) {
            t.at(i, art_col) = 1.0;
            basis[i] = static_cast<int>(art_col);
            ++art_col;
        }
    }

    // Phase one: minimize the sum of artificials.
    const std::size_t obj = t.objective_row();
    if (!artificial_row.empty()) {
        for (int i : artificial_row) {
            simd::axpy(-1.0, t.row(static_cast<std::size_t>(i)), t.row(obj), total_cols + 1);
        }
        for (std::size_t c = first_art; c < total_cols; ++c) t.at(obj, c) = 0.0;
        const PhaseResult res = run_simplex(t, basis, total_cols, opt.pivot_tol, opt, sol.iterations);
        if (res == PhaseResult::kIterationLimit) {
            sol.status = LpStatus::kIterationLimit;
            return sol;
        }
        const double infeasibility = -t.rhs(obj);
        double scale = 1.0;
        for (const auto& r : rows) scale = std::max(scale, std::abs(r.rhs));
        if (infeasibility > opt.feasibility_tol * scale) {
            sol.status = LpStatus::kInfeasible;
            for (std::size_t i = 0; i < m; ++i) {
                if (static_cast<std::size_t>(basis[i]) >= first_art && t.rhs(i) > opt.feasibility_tol)
                    sol.binding_rows.push_back(rows[i].name);
            }
            return sol;
        }
        // Pivot zero-valued artificials out of the basis where possible; rows
        // where that is impossible are redundant and are cleared.
        for (std::size_t i = 0; i < m; ++i) {
            if (static_cast<std::size_t>(basis[i]) < first_art) continue;
            std::size_t pc = first_art;
            for (std::size_t c = 0; c < first_art; ++c) {
                if (std::abs(t.at(i, c)) > opt.pivot_tol) {
                    pc = c;
                    break;
                }
            }
            if (pc < first_art) {
                t.pivot(i, pc);
                basis[i] = static_cast<int>(pc);
            } else {
                for (std::size_t c = 0; c <= total_cols; ++c) t.at(i, c) = 0.0;
                t.at(i, static_cast<std::size_t>(basis[i])) = 1.0;
            }
        }
    }

    // Phase two on the real objective, artificials barred from entering.
    std::vector<double> cstd(total_cols, 0.0);
    for (std::size_t k = 0; k < nvar; ++k) {
        for (const auto& [col, sign] : vmap[k].cols) cstd[static_cast<std::size_t>(col)] += lp.cost[k] * sign;
    }
    for (std::size_t c = 0; c <= total_cols; ++c) t.at(obj, c) = c < total_cols ? cstd[c] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double cb = cstd[static_cast<std::size_t>(basis[i])];
        if (cb != 0.0) simd::axpy(-cb, t.row(i), t.row(obj), total_cols + 1);
    }
    double cost_scale = 1.0;
    for (double c : lp.cost) cost_scale = std::max(cost_scale, std::abs(c));
    const PhaseResult res = run_simplex(t, basis, first_art, opt.pivot_tol * cost_scale, opt, sol.iterations);
    if (res == PhaseResult::kIterationLimit) {
        sol.status = LpStatus::kIterationLimit;
        return sol;
    }
    if (res == PhaseResult::kUnbounded) {
        sol.status = LpStatus::kUnbounded;
        return sol;
    }

    std::vector<double> y(total_cols, 0.0);
    for (std::size_t i = 0; i < m; ++i) y[static_cast<std::size_t>(basis[i])] = t.rhs(i);
    for (std::size_t k = 0; k < nvar; ++k) {
        double v = vmap[k].offset;
        for (const auto& [col, sign] : vmap[k].cols) v += sign * y[static_cast<std::size_t>(col)];
        // Snap round-off back inside the declared bounds.
        v = std::min(std::max(v, lp.lower[k]), lp.upper[k]);
        sol.x(static_cast<Eigen::Index>(k)) = v;
    }
    sol.objective = 0.0;
    for (std::size_t k = 0; k < nvar; ++k) sol.objective += lp.cost[k] * sol.x(static_cast<Eigen::Index>(k));
    for (const auto& row : lp.ub_rows) {
        double lhs = 0.0;
        for (const auto& [var, coef] : row.terms) lhs += coef * sol.x(var);
        if (std::abs(lhs - row.rhs) <= 1e-7 * (1.0 + std::abs(row.rhs))) sol.binding_rows.push_back(row.name);
    }
    sol.status = LpStatus::kOptimal;
    return sol;
}

std::string dump_lp(const LinearProgram& lp) {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto write_rows = [&](const std::vector<LpRow>& rows, const char* op) {
        for (const auto& row : rows) {
            out << "  " << row.name << ":";
            for (const auto& [var, coef] : row.terms) out << " " << fmt(coef) << "*" << lp.labels[static_cast<std::size_t>(var)];
            out << " " << op << " " << fmt(row.rhs) << "\n";
        }
    };
    out << "minimize\n";
    out << "variables " << lp.variables() << "\n";
    for (std::size_t k = 0; k < lp.variables(); ++k) {
        out << "  " << lp.labels[k] << " lower=" << fmt(lp.lower[k]) << " upper=" << fmt(lp.upper[k])
            << " cost=" << fmt(lp.cost[k]) << "\n";
    }
    out << "equalities " << lp.eq_rows.size() << "\n";
    write_rows(lp.eq_rows, "=");
    out << "inequalities " << lp.ub_rows.size() << "\n";
    write_rows(lp.ub_rows, "<=");
    return out.str();
}

}  // namespace vsmalloc
