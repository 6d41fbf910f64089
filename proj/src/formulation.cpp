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

#include "vsmalloc/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vsmalloc/error.hpp"

namespace vsmalloc {

void CostConfig::validate() const {
    std::vector<std::string> errors;
    auto check = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) errors.push_back(std::string("cost ") + name + " must be a positive number");
    };
    check(c_zeta, "c_zeta");
    check(c_f, "c_f");
    check(c_fdot, "c_fdot");
    check(c_M, "c_M");
    check(c_D, "c_D");
    if (!errors.empty()) throw InputError(std::move(errors));
}

PhiPair phi_normalize(const std::vector<double>& dzeta_dm, const std::vector<double>& dzeta_dd) {
    auto family = [](const std::vector<double>& s) {
        std::vector<double> phi(s.size(), 1.0);
        double top = 0.0;
        for (double v : s) top = std::max(top, v);
        if (!(top > 0.0)) return phi;
        for (std::size_t k = 0; k < s.size(); ++k) phi[k] = std::clamp(s[k] / top, -1.0, 1.0);
        return phi;
    };
    return {family(dzeta_dm), family(dzeta_dd)};
}

StepBounds make_step_bounds(double dm_lo, double dm_hi, double dd_lo, double dd_hi, const PhiPair& phi, PhiMode mode,
                            const std::vector<double>& scale_m, const std::vector<double>& scale_d) {
    if (!(dm_lo <= 0.0 && dm_hi >= 0.0 && dd_lo <= 0.0 && dd_hi >= 0.0))
        throw InputError("step bounds must bracket zero");
    const std::size_t count = phi.phi_m.size();
    if (phi.phi_d.size() != count || scale_m.size() != count || scale_d.size() != count)
        throw InputError("step bound inputs disagree on the number of gains");
    StepBounds b;
    b.phi_m = phi.phi_m;
    b.phi_d = phi.phi_d;
    auto window = [mode](double lo, double hi, double p, double scale, double& out_lo, double& out_hi) {
        double f = 1.0;
        if (mode == PhiMode::kSigned) f = p;
        if (mode == PhiMode::kMagnitude) f = std::abs(p);
        const double a = lo * f * scale;
        const double c = hi * f * scale;
        out_lo = std::min(a, c);
        out_hi = std::max(a, c);
    };
    b.dm_lo.resize(count);
    b.dm_hi.resize(count);
    b.dd_lo.resize(count);
    b.dd_hi.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        window(dm_lo, dm_hi, phi.phi_m[k], scale_m[k], b.dm_lo[k], b.dm_hi[k]);
        window(dd_lo, dd_hi, phi.phi_d[k], scale_d[k], b.dd_lo[k], b.dd_hi[k]);
    }
    return b;
}

GainLayout GainLayout::from_case(const GridCase& grid) {
    GainLayout layout;
    layout.units = controllable_units(grid);
    double total = 0.0;
    for (const auto& u : grid.units) total += u.p_g;
    if (!(total > 0.0)) throw InputError("total dispatched generation is zero");
    for (const auto& u : grid.units) layout.weights.push_back(u.p_g / total);
    return layout;
}

FreqInputs make_freq_inputs(const GridCase& grid, const AllocationState& alloc, double dP_system,
                            double rocof_limit, double nadir_limit, bool enabled, RocofRowForm form) {
    FreqInputs f;
    f.enabled = enabled;
    f.agg = aggregate(grid, alloc, dP_system);
    f.nadir = nadir_estimate(f.agg);
    f.rocof_limit = rocof_limit;
    f.nadir_limit = nadir_limit;
    f.rocof_form = form;
    return f;
}

namespace {

std::string idx(const char* base, long i) { return std::string(base) + "[" + std::to_string(i) + "]"; }

struct GainVars {
    std::vector<int> m, d, dm, dd;
};

GainVars add_gains(LinearProgram& lp, const AllocationState& alloc, const GainLayout& layout, const StepBounds& b) {
    if (b.dm_lo.size() != layout.units.size()) throw InputError("step bounds do not match the controllable units");
    GainVars v;
    for (std::size_t k = 0; k < layout.units.size(); ++k) {
        const int j = layout.units[k];
        const auto& box = alloc.bounds[static_cast<std::size_t>(j)];
        v.m.push_back(lp.add_variable(idx("m", j), box.m_lo, box.m_hi));
        v.d.push_back(lp.add_variable(idx("d", j), box.d_lo, box.d_hi));
        v.dm.push_back(lp.add_variable(idx("dm", j), b.dm_lo[k], b.dm_hi[k]));
        v.dd.push_back(lp.add_variable(idx("dd", j), b.dd_lo[k], b.dd_hi[k]));
    }
    for (std::size_t k = 0; k < layout.units.size(); ++k) {
        const int j = layout.units[k];
        lp.add_equality(idx("link_m", j), {{v.m[k], 1.0}, {v.dm[k], -1.0}}, alloc.m[static_cast<std::size_t>(j)]);
        lp.add_equality(idx("link_d", j), {{v.d[k], 1.0}, {v.dd[k], -1.0}}, alloc.d[static_cast<std::size_t>(j)]);
    }
    return v;
}

// Linear prediction rows value[i] - sum(sens * increments) = current[i].
std::vector<int> add_mode_predictions(LinearProgram& lp, const ModeSet& modes, const std::vector<Eigen::Index>& rows,
                                      const GainLayout& layout, const GainVars& g, bool real_part) {
    const Eigen::MatrixXd& sens = real_part ? modes.dsigma : modes.dzeta;
    if (sens.rows() != modes.size()) throw InputError("mode set carries no sensitivities");
    std::vector<int> vars;
    for (Eigen::Index i : rows) {
        const int var = lp.add_variable(idx(real_part ? "sigma" : "zeta", static_cast<long>(i)), -kInf, kInf);
        std::vector<std::pair<int, double>> terms{{var, 1.0}};
        for (std::size_t k = 0; k < layout.units.size(); ++k) {
            const int j = layout.units[k];
            terms.emplace_back(g.dm[k], -sens(i, gain_index(j, GainKind::kInertia)));
            terms.emplace_back(g.dd[k], -sens(i, gain_index(j, GainKind::kDamping)));
        }
        const double now = real_part ? modes.sigma(i) : modes.zetas(i);
        lp.add_equality(idx(real_part ? "predict_sigma" : "predict_zeta", static_cast<long>(i)), std::move(terms), now);
        vars.push_back(var);
    }
    return vars;
}

struct AggregateVars {
    int M, D, dM, dD;
};

AggregateVars add_aggregates(LinearProgram& lp, const AllocationState& alloc, const GainLayout& layout,
                             const GainVars& g) {
    AggregateVars a{};
    a.M = lp.add_variable("M", -kInf, kInf);
    a.D = lp.add_variable("D", -kInf, kInf);
    a.dM = lp.add_variable("dM", -kInf, kInf);
    a.dD = lp.add_variable("dD", -kInf, kInf);
    std::vector<bool> tunable(layout.weights.size(), false);
    for (int j : layout.units) tunable[static_cast<std::size_t>(j)] = true;
    double fixed_m = 0.0;
    double fixed_d = 0.0;
    for (std::size_t j = 0; j < layout.weights.size(); ++j) {
        if (tunable[j]) continue;
        fixed_m += layout.weights[j] * alloc.m[j];
        fixed_d += layout.weights[j] * alloc.d[j];
    }
    std::vector<std::pair<int, double>> mrow{{a.M, 1.0}}, drow{{a.D, 1.0}}, dmrow{{a.dM, 1.0}}, ddrow{{a.dD, 1.0}};
    for (std::size_t k = 0; k < layout.units.size(); ++k) {
        const double w = layout.weights[static_cast<std::size_t>(layout.units[k])];
        mrow.emplace_back(g.m[k], -w);
        drow.emplace_back(g.d[k], -w);
        dmrow.emplace_back(g.dm[k], -w);
        ddrow.emplace_back(g.dd[k], -w);
    }
    lp.add_equality("define_M", std::move(mrow), fixed_m);
    lp.add_equality("define_D", std::move(drow), fixed_d);
    lp.add_equality("define_dM", std::move(dmrow), 0.0);
    lp.add_equality("define_dD", std::move(ddrow), 0.0);
    return a;
}

struct SlackVars {
    int f1, f2, fdot1, fdot2;
};

// Frequency rows. With `soft` the four slacks are free to grow and carry the
// given costs; otherwise they are pinned at zero.
SlackVars add_frequency_rows(LinearProgram& lp, const FreqInputs& freq, const AggregateVars& a, bool soft,
                             const CostConfig& costs) {
    const double hi = (soft && freq.enabled) ? kInf : 0.0;
    const double cf = soft ? costs.c_f : 0.0;
    const double cr = soft ? costs.c_fdot : 0.0;
    const int df = lp.add_variable("df_max", -kInf, kInf);
    SlackVars s{};
    s.f1 = lp.add_variable("eta_f1", 0.0, hi, cf);
    s.f2 = lp.add_variable("eta_f2", 0.0, hi, cf);
    s.fdot1 = lp.add_variable("eta_fdot1", 0.0, hi, cr);
    s.fdot2 = lp.add_variable("eta_fdot2", 0.0, hi, cr);

    const auto& p = freq.agg;
    lp.add_equality("nadir_taylor", {{df, 1.0}, {a.dM, -freq.nadir.dnadir_dM}, {a.dD, -freq.nadir.dnadir_dD}},
                    freq.nadir.nadir);
    if (!freq.enabled) return s;

    lp.add_inequality("nadir_low", {{df, -1.0}, {s.f1, -1.0}}, freq.nadir_limit);
    lp.add_inequality("nadir_high", {{df, 1.0}, {s.f2, -1.0}}, freq.nadir_limit);

    const double magnitude = p.f0 * std::abs(p.dP);
    if (freq.rocof_form == RocofRowForm::kExact) {
        // |f0 dP / M_new| <= limit + eta, cross-multiplied and divided by the
        // current M so the slack keeps Hz/s units near the expansion point.
        if (p.dP > 0.0) {
            lp.add_inequality("rocof_low", {{a.M, -freq.rocof_limit / p.M}, {s.fdot1, -1.0}}, -magnitude / p.M);
        } else if (p.dP < 0.0) {
            lp.add_inequality("rocof_high", {{a.M, -freq.rocof_limit / p.M}, {s.fdot2, -1.0}}, -magnitude / p.M);
        }
    } else {
        const double now = rocof(p);
        const double k = p.f0 * p.dP / (p.M * p.M);
        lp.add_inequality("rocof_low", {{a.M, -k}, {s.fdot1, -1.0}}, freq.rocof_limit + now - k * p.M);
        lp.add_inequality("rocof_high", {{a.M, k}, {s.fdot2, -1.0}}, freq.rocof_limit - now + k * p.M);
    }
    if (has_governor(p) && p.T > 0.0) {
        lp.add_inequality("nadir_time", {{a.M, 1.0 / p.T}, {a.D, -1.0}}, p.F_g - freq.eps_tm);
    }
    return s;
}

LinearProgram build_effort(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                           const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                           double zeta_floor, double filter_tol, bool soft) {
    costs.validate();
    LinearProgram lp;
    const GainVars g = add_gains(lp, alloc, layout, bounds);
    const auto rows = constraint_modes(modes, filter_tol);
    const auto zeta = add_mode_predictions(lp, modes, rows, layout, g, false);
    const AggregateVars a = add_aggregates(lp, alloc, layout, g);
    add_frequency_rows(lp, freq, a, soft, costs);
    const int eta_zeta = lp.add_variable("eta_zeta", 0.0, soft ? kInf : 0.0, soft ? costs.c_zeta : 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        lp.add_inequality(idx("zeta_floor", static_cast<long>(rows[r])), {{zeta[r], -1.0}, {eta_zeta, -1.0}},
                          -zeta_floor);
    }
    lp.cost[static_cast<std::size_t>(a.M)] = costs.c_M;
    lp.cost[static_cast<std::size_t>(a.D)] = costs.c_D;
    return lp;
}

}  // namespace

LinearProgram build_step1(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                          const StepBounds& bounds, double filter_tol) {
    LinearProgram lp;
    const GainVars g = add_gains(lp, alloc, layout, bounds);
    const auto rows = constraint_modes(modes, filter_tol);
    const auto sigma = add_mode_predictions(lp, modes, rows, layout, g, true);
    const int top = lp.add_variable("sigma_max", -kInf, kInf, 1.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        lp.add_inequality(idx("sigma_epigraph", static_cast<long>(rows[r])), {{sigma[r], 1.0}, {top, -1.0}}, 0.0);
    }
    return lp;
}

LinearProgram build_step2(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                          const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                          double zeta_floor, double filter_tol) {
    costs.validate();
    LinearProgram lp;
    const GainVars g = add_gains(lp, alloc, layout, bounds);
    const auto rows = constraint_modes(modes, filter_tol);
    const auto zeta = add_mode_predictions(lp, modes, rows, layout, g, false);
    // Capped at the floor: damping beyond the threshold earns nothing, so the
    // frequency slacks are not traded against surplus damping.
    const int worst = lp.add_variable("zeta_min", -kInf, zeta_floor, -costs.c_zeta);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        lp.add_inequality(idx("zeta_epigraph", static_cast<long>(rows[r])), {{worst, 1.0}, {zeta[r], -1.0}}, 0.0);
    }
    const AggregateVars a = add_aggregates(lp, alloc, layout, g);
    add_frequency_rows(lp, freq, a, true, costs);
    return lp;
}

LinearProgram build_step3(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                          const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                          double zeta_floor, double filter_tol) {
    return build_effort(modes, alloc, layout, freq, costs, bounds, zeta_floor, filter_tol, false);
}

LinearProgram build_uniform(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                            const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                            double zeta_floor, double filter_tol) {
    return build_effort(modes, alloc, layout, freq, costs, bounds, zeta_floor, filter_tol, true);
}

GainStep extract_step(const LinearProgram& lp, const LpSolution& sol, const GainLayout& layout) {
    GainStep step;
    for (int j : layout.units) {
        step.dm.push_back(sol.x(lp.index_of(idx("dm", j))));
        step.dd.push_back(sol.x(lp.index_of(idx("dd", j))));
    }
    return step;
}

}  // namespace vsmalloc
