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

#include "vsmalloc/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "vsmalloc/error.hpp"

namespace vsmalloc {

void LoopConfig::validate() const {
    std::vector<std::string> errors;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0)) errors.push_back(std::string(name) + " must be > 0");
    };
    positive(zeta_floor, "zeta_floor");
    positive(rocof_limit, "rocof_limit");
    positive(nadir_limit, "nadir_limit");
    positive(mismatch_threshold, "mismatch_threshold");
    positive(min_step_scale, "min_step_scale");
    positive(convergence_eps, "convergence_eps");
    positive(min_move_scale, "min_move_scale");
    if (max_iterations < 1) errors.push_back("max_iterations must be >= 1");
    if (convergence_window < 1) errors.push_back("convergence_window must be >= 1");
    if (min_step_scale > 1.0) errors.push_back("min_step_scale must be <= 1");
    if (min_move_scale > 1.0) errors.push_back("min_move_scale must be <= 1");
    if (!(step_dm_lo <= 0.0 && step_dm_hi >= 0.0)) errors.push_back("step bounds for m must bracket zero");
    if (!(step_dd_lo <= 0.0 && step_dd_hi >= 0.0)) errors.push_back("step bounds for d must bracket zero");
    if (dP && !std::isfinite(*dP)) errors.push_back("dP must be finite");
    if (!(filter_tol >= 0.0)) errors.push_back("filter_tol must be >= 0");
    if (!(progress_margin >= 0.0)) errors.push_back("progress_margin must be >= 0");
    if (!(zeta_backoff >= 0.0)) errors.push_back("zeta_backoff must be >= 0");
    if (max_cuts < 0) errors.push_back("max_cuts must be >= 0");
    if (!errors.empty()) throw InputError(std::move(errors));
}

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::kInitial:
            return "initial";
        case Phase::kStability:
            return "stability";
        case Phase::kDamping:
            return "damping";
        case Phase::kEffort:
            return "effort";
        case Phase::kUniform:
            return "uniform";
    }
    return "?";
}

const char* to_string(LoopStatus status) {
    switch (status) {
        case LoopStatus::kConverged:
            return "converged";
        case LoopStatus::kMaxIterations:
            return "max-iterations";
        case LoopStatus::kStepFailure:
            return "step-failure";
        case LoopStatus::kLpFailure:
            return "lp-failure";
    }
    return "?";
}

bool convergence_check(const std::vector<TraceRow>& rows, double eps, int window) {
    if (window < 1 || rows.size() < static_cast<std::size_t>(window) + 1) return false;
    for (std::size_t k = rows.size() - static_cast<std::size_t>(window); k < rows.size(); ++k) {
        const double change = std::abs(rows[k].M - rows[k - 1].M) + std::abs(rows[k].D - rows[k - 1].D);
        if (!(change < eps)) return false;
    }
    return true;
}

Allocator::Allocator(std::shared_ptr<const ModelProvider> provider, LoopConfig config, CostConfig costs)
    : provider_(std::move(provider)), config_(std::move(config)), costs_(costs) {
    if (!provider_) throw InputError("allocator needs a model provider");
    config_.validate();
    costs_.validate();
    layout_ = GainLayout::from_case(provider_->grid());
    if (layout_.units.empty()) throw InputError("case has no controllable units");
    dP_ = config_.dP.value_or(default_disturbance(provider_->grid()));
}

Evaluation Allocator::evaluate(const AllocationState& alloc) const {
    Evaluation e;
    e.model = provider_->linearize(alloc);
    e.modes = decompose(e.model);
    e.worst = worst_modes(e.modes, config_.filter_tol);
    e.freq = make_freq_inputs(provider_->grid(), alloc, dP_, config_.rocof_limit, config_.nadir_limit,
                              config_.freq_constraints, config_.rocof_form);
    e.rocof = rocof(e.freq.agg);
    return e;
}

bool Allocator::criteria_met(const Evaluation& eval, double tol) const {
    if (eval.worst.zeta_min < config_.zeta_floor - tol) return false;
    if (!config_.freq_constraints) return true;
    if (std::abs(eval.rocof) > config_.rocof_limit + tol) return false;
    if (std::abs(eval.freq.nadir.nadir) > config_.nadir_limit + tol) return false;
    if (has_governor(eval.freq.agg) && eval.freq.agg.T > 0.0 &&
        !(eval.freq.agg.M / eval.freq.agg.T - eval.freq.agg.F_g < eval.freq.agg.D))
        return false;
    return true;
}

namespace {

AllocationState apply_step(const AllocationState& base, const GainLayout& layout, const GainStep& step, double scale) {
    AllocationState out = base;
    for (std::size_t k = 0; k < layout.units.size(); ++k) {
        const auto j = static_cast<std::size_t>(layout.units[k]);
        const auto& box = base.bounds[j];
        out.m[j] = std::clamp(base.m[j] + scale * step.dm[k], box.m_lo, box.m_hi);
        out.d[j] = std::clamp(base.d[j] + scale * step.dd[k], box.d_lo, box.d_hi);
    }
    out.iteration = base.iteration + 1;
    return out;
}

// Linearization of the damping ratios (and of the nadir, when the program
// carries nadir rows) around a rejected trial point, expressed in the
// increments of the current program. Added after a failed validation so the
// re-solved program sees the curvature the first model missed.
void add_trial_cut(LinearProgram& lp, int cut, const Evaluation& trial, const GainLayout& layout,
                   const GainStep& anchor, double filter_tol, bool keep_rows, double keep_target, double zeta_floor) {
    const std::string tag = "cut" + std::to_string(cut);
    std::vector<int> dm, dd;
    for (int j : layout.units) {
        dm.push_back(lp.index_of("dm[" + std::to_string(j) + "]"));
        dd.push_back(lp.index_of("dd[" + std::to_string(j) + "]"));
    }
    for (const Eigen::Index i : constraint_modes(trial.modes, filter_tol)) {
        const std::string suffix = "[" + std::to_string(i) + "]";
        const int z = lp.add_variable(tag + "_zeta" + suffix, -kInf, kInf);
        std::vector<std::pair<int, double>> terms{{z, 1.0}};
        double rhs = trial.modes.zetas(i);
        for (std::size_t k = 0; k < layout.units.size(); ++k) {
            const int j = layout.units[k];
            const double gm = trial.modes.dzeta(i, gain_index(j, GainKind::kInertia));
            const double gd = trial.modes.dzeta(i, gain_index(j, GainKind::kDamping));
            terms.emplace_back(dm[k], -gm);
            terms.emplace_back(dd[k], -gd);
            rhs -= gm * anchor.dm[k] + gd * anchor.dd[k];
        }
        lp.add_equality(tag + "_predict" + suffix, std::move(terms), rhs);
        if (keep_rows) lp.add_inequality(tag + "_keep" + suffix, {{z, -1.0}}, -keep_target);
        if (lp.has("zeta_min")) lp.add_inequality(tag + "_epigraph" + suffix, {{lp.index_of("zeta_min"), 1.0}, {z, -1.0}}, 0.0);
        if (lp.has("eta_zeta")) {
            lp.add_inequality(tag + "_floor" + suffix, {{z, -1.0}, {lp.index_of("eta_zeta"), -1.0}}, -zeta_floor);
        }
    }
    if (lp.has("df_max") && trial.freq.enabled) {
        const auto& agg = trial.freq.agg;
        const auto& n = trial.freq.nadir;
        const int f = lp.add_variable(tag + "_df_max", -kInf, kInf);
        lp.add_equality(tag + "_nadir", {{f, 1.0}, {lp.index_of("M"), -n.dnadir_dM}, {lp.index_of("D"), -n.dnadir_dD}},
                        n.nadir - n.dnadir_dM * agg.M - n.dnadir_dD * agg.D);
        lp.add_inequality(tag + "_nadir_low", {{f, -1.0}, {lp.index_of("eta_f1"), -1.0}}, trial.freq.nadir_limit);
        lp.add_inequality(tag + "_nadir_high", {{f, 1.0}, {lp.index_of("eta_f2"), -1.0}}, trial.freq.nadir_limit);
    }
}

}  // namespace

ValidationResult Allocator::validate_and_halve(const Evaluation& previous, const AllocationState& base,
                                               const GainStep& step, const CandidateGuard& guard) const {
    const auto rows = constraint_modes(previous.modes, config_.filter_tol);
    // Predicted first-order change of every tracked damping ratio at full step.
    std::vector<double> delta(rows.size(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t k = 0; k < layout_.units.size(); ++k) {
            const int j = layout_.units[k];
            delta[r] += previous.modes.dzeta(rows[r], gain_index(j, GainKind::kInertia)) * step.dm[k] +
                        previous.modes.dzeta(rows[r], gain_index(j, GainKind::kDamping)) * step.dd[k];
        }
    }

    ValidationResult result;
    double scale = 1.0;
    while (true) {
        result.alloc = apply_step(base, layout_, step, scale);
        result.scale = scale;
        bool ok = true;
        try {
            result.eval = evaluate(result.alloc);
        } catch (const NumericalError&) {
            ok = false;
        }
        if (ok) {
            const auto match = match_modes(previous.modes, result.eval.modes);
            result.predicted_zeta.assign(rows.size(), 0.0);
            result.actual_zeta.assign(rows.size(), 0.0);
            result.max_mismatch = 0.0;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                result.predicted_zeta[r] = previous.modes.zetas(rows[r]) + scale * delta[r];
                const Eigen::Index k = match[static_cast<std::size_t>(rows[r])];
                result.actual_zeta[r] = k >= 0 ? result.eval.modes.zetas(k) : std::numeric_limits<double>::quiet_NaN();
                const double gap = std::abs(result.predicted_zeta[r] - result.actual_zeta[r]);
                result.max_mismatch = std::isnan(gap) ? kInf : std::max(result.max_mismatch, gap);
            }
            ok = result.max_mismatch <= config_.mismatch_threshold && (!guard || guard(result.eval));
        }
        if (ok) {
            result.accepted = true;
            return result;
        }
        if (scale * 0.5 < config_.min_step_scale) return result;
        scale *= 0.5;
        ++result.halvings;
    }
}

TraceRow Allocator::make_row(int iteration, Phase phase, const AllocationState& alloc, const Evaluation& eval) const {
    TraceRow row;
    row.iteration = iteration;
    row.phase = phase;
    row.m = alloc.m;
    row.d = alloc.d;
    row.zeta_min = eval.worst.zeta_min;
    row.sigma_max = eval.worst.sigma_max;
    row.rocof = eval.rocof;
    row.nadir = eval.freq.nadir.nadir;
    row.nadir_regime = eval.freq.nadir.regime;
    row.M = eval.freq.agg.M;
    row.D = eval.freq.agg.D;
    row.effort = costs_.c_M * row.M + costs_.c_D * row.D;
    for (int j : layout_.units) {
        row.dzeta_min_dm.push_back(eval.modes.dzeta(eval.worst.zeta_index, gain_index(j, GainKind::kInertia)));
        row.dzeta_min_dd.push_back(eval.modes.dzeta(eval.worst.zeta_index, gain_index(j, GainKind::kDamping)));
    }
    return row;
}

IterationTrace Allocator::run(const AllocationState& alloc0, bool uniform, TraceSink* sink) const {
    IterationTrace trace;
    trace.controllable = layout_.units;
    AllocationState alloc = alloc0;
    Evaluation eval = evaluate(alloc);

    auto push = [&](TraceRow row) {
        trace.rows.push_back(std::move(row));
        if (sink) sink->on_row(trace, trace.rows.back());
    };
    auto snapshot = [&](const std::string& tag) { trace.spectra.push_back({tag, eval.modes.lambdas}); };

    push(make_row(0, Phase::kInitial, alloc, eval));
    snapshot("initial");

    const std::size_t count = layout_.units.size();
    std::vector<double> kappa_m(count, 1.0), kappa_d(count, 1.0);
    std::vector<double> last_dm(count, 0.0), last_dd(count, 0.0);
    Phase phase = uniform ? Phase::kUniform : Phase::kStability;
    std::size_t phase_start = 0;  // first row index of the current phase
    trace.status = LoopStatus::kMaxIterations;

    for (int iter = 1; iter <= config_.max_iterations; ++iter) {
        if (phase == Phase::kStability && eval.worst.sigma_max < 0.0) {
            phase = Phase::kDamping;
            phase_start = trace.rows.size() - 1;
            snapshot("damping");
        }
        if (phase == Phase::kDamping && criteria_met(eval, 0.0)) {
            phase = Phase::kEffort;
            phase_start = trace.rows.size() - 1;
            snapshot("effort");
        }

        const bool met = criteria_met(eval, 0.0);
        PhiPair phi{std::vector<double>(count, 1.0), std::vector<double>(count, 1.0)};
        const bool use_phi = phase == Phase::kStability || phase == Phase::kDamping || (phase == Phase::kUniform && !met);
        if (use_phi && config_.phi_mode != PhiMode::kOff) {
            const auto row = make_row(0, phase, alloc, eval);
            phi = phi_normalize(row.dzeta_min_dm, row.dzeta_min_dd);
        }
        const StepBounds phi_bounds = make_step_bounds(config_.step_dm_lo, config_.step_dm_hi, config_.step_dd_lo,
                                                       config_.step_dd_hi, phi,
                                                       use_phi ? config_.phi_mode : PhiMode::kOff, kappa_m, kappa_d);
        // The normalization follows the single worst mode. When several modes
        // share the worst ratio its windows can rule out every direction that
        // lifts them all, so the margin program is retried without it.
        const StepBounds open_bounds = make_step_bounds(config_.step_dm_lo, config_.step_dm_hi, config_.step_dd_lo,
                                                        config_.step_dd_hi, phi, PhiMode::kOff, kappa_m, kappa_d);

        // Hard rows keeping every predicted damping ratio above a target: the
        // current worst ratio raised by the progress margin, capped at the
        // floor. The margin makes the first-order gain dominate the
        // second-order error for small enough steps, so some halving passes
        // the monotonicity guard. Without a feasible margin the target drops
        // to the current worst ratio.
        const bool keep_rows = phase == Phase::kDamping || phase == Phase::kUniform;
        const bool effort_guarded = (phase == Phase::kUniform && met) || phase == Phase::kEffort;
        const double target_floor = config_.zeta_floor + config_.zeta_backoff;
        auto build = [&](double margin, const StepBounds& bounds, double target) {
            LinearProgram out;
            switch (phase) {
                case Phase::kStability:
                    out = build_step1(eval.modes, alloc, layout_, bounds, config_.filter_tol);
                    break;
                case Phase::kDamping:
                    out = build_step2(eval.modes, alloc, layout_, eval.freq, costs_, bounds, target,
                                      config_.filter_tol);
                    break;
                case Phase::kEffort:
                    out = build_step3(eval.modes, alloc, layout_, eval.freq, costs_, bounds, target,
                                      config_.filter_tol);
                    break;
                default:
                    out = build_uniform(eval.modes, alloc, layout_, eval.freq, costs_, bounds, target,
                                        config_.filter_tol);
                    break;
            }
            if (keep_rows) {
                const double keep = std::min(eval.worst.zeta_min + margin, target);
                for (const Eigen::Index i : constraint_modes(eval.modes, config_.filter_tol)) {
                    const std::string label = "zeta[" + std::to_string(i) + "]";
                    if (!out.has(label)) continue;
                    out.add_inequality("zeta_keep[" + std::to_string(i) + "]", {{out.index_of(label), -1.0}},
                                       -keep);
                }
            }
            return out;
        };
        const bool use_margin = keep_rows && eval.worst.zeta_min < target_floor && config_.progress_margin > 0.0;
        const double zeta_before = eval.worst.zeta_min;
        const double effort_before = costs_.c_M * eval.freq.agg.M + costs_.c_D * eval.freq.agg.D;

        // Acceptance guards beyond the prediction mismatch.
        CandidateGuard guard;
        if (effort_guarded) {
            guard = [this, effort_before](const Evaluation& cand) {
                const double effort = costs_.c_M * cand.freq.agg.M + costs_.c_D * cand.freq.agg.D;
                return criteria_met(cand, config_.guard_tol) && effort <= effort_before + 1e-12;
            };
        } else if (phase == Phase::kUniform || phase == Phase::kDamping) {
            // Below the floor the worst ratio may not slip at all. A tolerance
            // here would let many small accepted losses add up.
            const double floor =
                zeta_before < config_.zeta_floor ? zeta_before : config_.zeta_floor - config_.guard_tol;
            guard = [floor](const Evaluation& cand) { return cand.worst.zeta_min >= floor; };
        }

        // Solve, validate, and on rejection re-solve with a cut taken at the
        // last trial point, a bounded number of times.
        struct Cut {
            Evaluation trial;
            GainStep anchor;
        };
        std::vector<Cut> cuts;
        LinearProgram lp;
        LpSolution sol;
        GainStep step;
        ValidationResult v;
        bool lp_failed = false;
        while (true) {
            auto attempt = [&](double margin, const StepBounds& bounds, double target) {
                lp = build(margin, bounds, target);
                const double keep = std::min(zeta_before + margin, target);
                for (std::size_t c = 0; c < cuts.size(); ++c) {
                    add_trial_cut(lp, static_cast<int>(c), cuts[c].trial, layout_, cuts[c].anchor, config_.filter_tol,
                                  keep_rows, keep, target);
                }
                sol = solve_lp(lp);
            };
            attempt(use_margin ? config_.progress_margin : 0.0, phi_bounds, target_floor);
            if (use_margin && !sol.optimal() && use_phi) attempt(config_.progress_margin, open_bounds, target_floor);
            if (use_margin && !sol.optimal()) attempt(0.0, phi_bounds, target_floor);
            // The back-off can be out of reach within one window; the floor
            // itself is the last resort.
            if (!sol.optimal() && config_.zeta_backoff > 0.0) attempt(0.0, phi_bounds, config_.zeta_floor);
            if (lp_observer_) lp_observer_(iter, phase, lp);
            // Cuts that empty the program mean no step agrees with what the
            // rejected trials showed; that is a failed step, not a bad model.
            if (!sol.optimal() && !cuts.empty()) break;
            if (!sol.optimal()) {
                lp_failed = true;
                break;
            }
            step = extract_step(lp, sol, layout_);
            v = validate_and_halve(eval, alloc, step, guard);
            if (v.accepted || phase == Phase::kStability || static_cast<int>(cuts.size()) >= config_.max_cuts) break;
            GainStep anchor = step;
            for (auto& x : anchor.dm) x *= v.scale;
            for (auto& x : anchor.dd) x *= v.scale;
            cuts.push_back({std::move(v.eval), std::move(anchor)});
        }
        if (lp_failed) {
            trace.status = LoopStatus::kLpFailure;
            trace.binding_rows = sol.binding_rows;
            std::ostringstream out;
            out << to_string(phase) << " program at iteration " << iter << " is " << to_string(sol.status);
            if (!sol.binding_rows.empty()) {
                out << "; rows:";
                for (const auto& name : sol.binding_rows) out << " " << name;
            }
            trace.diagnosis = out.str();
            break;
        }
        if (!v.accepted && effort_guarded && criteria_met(eval, config_.guard_tol)) {
            // Every limit holds and no step that lowers the effort survives
            // validation: the iterate is stationary at the resolution of the
            // halving, which the window test would only confirm.
            trace.status = LoopStatus::kConverged;
            trace.diagnosis = std::string(to_string(phase)) + " phase stationary at iteration " +
                              std::to_string(iter) + ": no validated effort-reducing step";
            break;
        }
        if (!v.accepted) {
            trace.status = LoopStatus::kStepFailure;
            std::ostringstream out;
            out << to_string(phase) << " phase stalled at iteration " << iter << ": no step down to scale "
                << config_.min_step_scale << " passed validation after " << cuts.size()
                << " cuts (last mismatch " << v.max_mismatch << ")";
            trace.diagnosis = out.str();
            break;
        }

        if (config_.move_limit_adaptation) {
            auto adapt = [&](std::vector<double>& kappa, std::vector<double>& last, const std::vector<double>& inc) {
                for (std::size_t k = 0; k < count; ++k) {
                    const double taken = v.scale * inc[k];
                    if (taken * last[k] < 0.0) {
                        kappa[k] = std::max(kappa[k] * 0.5, config_.min_move_scale);
                    } else if (std::abs(taken) > 1e-12) {
                        kappa[k] = std::min(kappa[k] * 2.0, 1.0);
                    }
                    if (std::abs(taken) > 1e-12) last[k] = taken;
                }
            };
            adapt(kappa_m, last_dm, step.dm);
            adapt(kappa_d, last_dd, step.dd);
        }

        alloc = v.alloc;
        alloc.iteration = iter;
        eval = std::move(v.eval);
        TraceRow row = make_row(iter, phase, alloc, eval);
        row.halvings = v.halvings;
        row.step_scale = v.scale;
        row.max_mismatch = v.max_mismatch;
        row.predicted_zeta = std::move(v.predicted_zeta);
        row.actual_zeta = std::move(v.actual_zeta);
        for (const char* name : {"eta_zeta", "eta_f1", "eta_f2", "eta_fdot1", "eta_fdot2"}) {
            row.slacks.push_back(lp.has(name) ? sol.x(lp.index_of(name)) : 0.0);
        }
        push(std::move(row));

        if (phase == Phase::kEffort || phase == Phase::kUniform) {
            std::vector<TraceRow> window(trace.rows.begin() + static_cast<std::ptrdiff_t>(phase_start),
                                         trace.rows.end());
            bool slacks_clear = true;
            const std::size_t tail = std::min<std::size_t>(window.size(), config_.convergence_window);
            for (std::size_t k = window.size() - tail; k < window.size(); ++k) {
                for (double s : window[k].slacks) slacks_clear = slacks_clear && s < config_.slack_tol;
            }
            if (slacks_clear && criteria_met(eval, config_.guard_tol) &&
                convergence_check(window, config_.convergence_eps, config_.convergence_window)) {
                trace.status = LoopStatus::kConverged;
                break;
            }
        }
    }
    if (trace.status == LoopStatus::kMaxIterations) {
        trace.diagnosis = std::string(to_string(phase)) + " phase did not converge within " +
                          std::to_string(config_.max_iterations) + " iterations";
    }
    trace.final_phase = phase;
    trace.final_alloc = alloc;
    snapshot("final");
    return trace;
}

IterationTrace Allocator::run_multistep(const AllocationState& alloc0, TraceSink* sink) const {
    return run(alloc0, false, sink);
}

IterationTrace Allocator::run_uniform(const AllocationState& alloc0, TraceSink* sink) const {
    return run(alloc0, true, sink);
}

IterationTrace run_multistep(const GridCase& grid, const AllocationState& alloc0, const LoopConfig& config,
                             const CostConfig& costs, TraceSink* sink) {
    return Allocator(SwingModelProvider::create(grid), config, costs).run_multistep(alloc0, sink);
}

IterationTrace run_uniform(const GridCase& grid, const AllocationState& alloc0, const LoopConfig& config,
                           const CostConfig& costs, TraceSink* sink) {
    return Allocator(SwingModelProvider::create(grid), config, costs).run_uniform(alloc0, sink);
}

}  // namespace vsmalloc
