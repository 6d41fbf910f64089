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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vsmalloc/formulation.hpp"
#include "vsmalloc/freq_metrics.hpp"
#include "vsmalloc/grid_model.hpp"
#include "vsmalloc/modal_analysis.hpp"

namespace vsmalloc {

struct LoopConfig {
    double zeta_floor = 0.10;
    double rocof_limit = 1.0;  // Hz/s
    double nadir_limit = 0.8;  // Hz
    // Disturbance in p.u. on the case base power. Unset: the dispatch of the
    // unit at the disturbance bus (loss of that unit).
    std::optional<double> dP;
    int max_iterations = 500;
    double mismatch_threshold = 0.01;
    double min_step_scale = 1.0 / 64.0;
    double convergence_eps = 1e-4;
    int convergence_window = 5;
    // Base increment windows per iteration.
    double step_dm_lo = -0.5, step_dm_hi = 0.5;
    double step_dd_lo = -0.5, step_dd_hi = 0.5;
    PhiMode phi_mode = PhiMode::kSigned;
    // Shrink a gain's window when its increment flips sign between accepted
    // iterations and grow it back while the direction holds.
    bool move_limit_adaptation = true;
    double min_move_scale = 1.0 / 64.0;
    bool freq_constraints = true;
    RocofRowForm rocof_form = RocofRowForm::kExact;
    double filter_tol = 1e-9;
    double slack_tol = 1e-9;
    double guard_tol = 1e-6;
    // Required first-order gain of the worst damping ratio while below the floor.
    double progress_margin = 1e-3;
    // The programs aim the damping rows this far above the floor so that
    // curvature lost on an accepted step does not leave the iterate hugging
    // the acceptance tolerance.
    double zeta_backoff = 1e-4;
    // Re-solves with a linearization cut at the rejected trial point before a
    // step counts as failed.
    int max_cuts = 8;

    void validate() const;
    bool operator==(const LoopConfig&) const = default;
};

enum class Phase { kInitial = 0, kStability = 1, kDamping = 2, kEffort = 3, kUniform = 4 };
const char* to_string(Phase phase);

struct TraceRow {
    int iteration = 0;
    Phase phase = Phase::kInitial;  // formulation whose solution produced this iterate
    std::vector<double> m, d;       // every unit
    double zeta_min = 0.0;
    double sigma_max = 0.0;
    double rocof = 0.0;  // Hz/s
    double nadir = 0.0;  // Hz
    NadirRegime nadir_regime = NadirRegime::kOscillatory;
    double M = 0.0;
    double D = 0.0;
    double effort = 0.0;  // c_M M + c_D D
    int halvings = 0;
    double step_scale = 1.0;
    double max_mismatch = 0.0;
    std::vector<double> predicted_zeta;  // per constraint mode of the previous iterate
    std::vector<double> actual_zeta;     // matched modes of this iterate
    // eta_zeta, eta_f1, eta_f2, eta_fdot1, eta_fdot2 of the producing program
    std::vector<double> slacks;
    std::vector<double> dzeta_min_dm, dzeta_min_dd;  // controllable units, at this iterate
};

struct SpectrumSnapshot {
    std::string tag;
    Eigen::VectorXcd lambdas;
};

enum class LoopStatus { kConverged, kMaxIterations, kStepFailure, kLpFailure };
const char* to_string(LoopStatus status);

struct IterationTrace {
    std::vector<int> controllable;
    std::vector<TraceRow> rows;
    std::vector<SpectrumSnapshot> spectra;
    LoopStatus status = LoopStatus::kMaxIterations;
    Phase final_phase = Phase::kInitial;
    std::string diagnosis;
    std::vector<std::string> binding_rows;  // populated on LP failure
    AllocationState final_alloc;
};

// Receives rows as soon as they are accepted.
class TraceSink {
 public:
    virtual ~TraceSink() = default;
    virtual void on_row(const IterationTrace& trace, const TraceRow& row) = 0;
};

// Everything the loop needs to know about one allocation.
struct Evaluation {
    LinearModel model;
    ModeSet modes;
    WorstModes worst;
    FreqInputs freq;
    double rocof = 0.0;
};

struct ValidationResult {
    bool accepted = false;
    AllocationState alloc;
    Evaluation eval;
    double scale = 1.0;
    int halvings = 0;
    double max_mismatch = 0.0;
    std::vector<double> predicted_zeta;
    std::vector<double> actual_zeta;
};

// Extra acceptance test applied to a candidate after the mismatch test.
using CandidateGuard = std::function<bool(const Evaluation&)>;

// Sees the program whose solution drives each iteration (iteration, phase, program).
using LpObserver = std::function<void(int, Phase, const LinearProgram&)>;

class Allocator {
 public:
    Allocator(std::shared_ptr<const ModelProvider> provider, LoopConfig config, CostConfig costs);

    const LoopConfig& config() const { return config_; }
    const GainLayout& layout() const { return layout_; }
    double disturbance() const { return dP_; }

    Evaluation evaluate(const AllocationState& alloc) const;
    bool criteria_met(const Evaluation& eval, double tol) const;

    // Relinearizes at base + scale * step, compares the damping ratios of the
    // matched modes against the linear prediction, and halves the scale until
    // the mismatch and the guard pass or the scale drops below
    // min_step_scale.
    ValidationResult validate_and_halve(const Evaluation& previous, const AllocationState& base, const GainStep& step,
                                        const CandidateGuard& guard = {}) const;

    void set_lp_observer(LpObserver observer) { lp_observer_ = std::move(observer); }

    IterationTrace run_multistep(const AllocationState& alloc0, TraceSink* sink = nullptr) const;
    IterationTrace run_uniform(const AllocationState& alloc0, TraceSink* sink = nullptr) const;

 private:
    IterationTrace run(const AllocationState& alloc0, bool uniform, TraceSink* sink) const;
    TraceRow make_row(int iteration, Phase phase, const AllocationState& alloc, const Evaluation& eval) const;

    std::shared_ptr<const ModelProvider> provider_;
    LoopConfig config_;
    CostConfig costs_;
    GainLayout layout_;
    double dP_ = 0.0;
    LpObserver lp_observer_;
};

IterationTrace run_multistep(const GridCase& grid, const AllocationState& alloc0, const LoopConfig& config,
                             const CostConfig& costs, TraceSink* sink = nullptr);
IterationTrace run_uniform(const GridCase& grid, const AllocationState& alloc0, const LoopConfig& config,
                           const CostConfig& costs, TraceSink* sink = nullptr);

// True iff each of the last `window` consecutive changes of |dM| + |dD| is
// below eps. Needs at least window + 1 rows.
bool convergence_check(const std::vector<TraceRow>& rows, double eps, int window);

}  // namespace vsmalloc
