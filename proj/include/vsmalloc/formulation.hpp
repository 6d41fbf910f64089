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

#include <vector>

#include "vsmalloc/freq_metrics.hpp"
#include "vsmalloc/grid_model.hpp"
#include "vsmalloc/lp_kernel.hpp"
#include "vsmalloc/modal_analysis.hpp"

// Builders for the per-iteration linear programs of the gain allocator.
//
// Every builder shares one variable layout so solutions can be compared
// across formulations:
//   m[j], d[j], dm[j], dd[j]         gains of controllable unit j and their increments
//   sigma[i] / zeta[i]               predicted real part / damping ratio of mode i
//   sigma_max / zeta_min             epigraph variables
//   M, D, dM, dD                     aggregate inertia and damping and their increments
//   df_max                           linearized nadir
//   eta_f1, eta_f2, eta_fdot1, eta_fdot2, eta_zeta   slacks
// Unit indices j are positions in GridCase::units; mode indices i are
// positions in the ModeSet.
namespace vsmalloc {

struct CostConfig {
    double c_zeta = 100.0;
    double c_f = 10.0;
    double c_fdot = 10.0;
    double c_M = 1.0;
    double c_D = 1.0;

    void validate() const;
    bool operator==(const CostConfig&) const = default;
};

// Per controllable unit (in GainLayout order) increment windows for one
// iteration, with the sensitivity weights that produced them.
struct StepBounds {
    std::vector<double> dm_lo, dm_hi, dd_lo, dd_hi;
    std::vector<double> phi_m, phi_d;
};

struct PhiPair {
    std::vector<double> phi_m;
    std::vector<double> phi_d;
};

// Each family is divided by its largest entry. A family without a positive
// entry falls back to all ones. Results are clipped to [-1, 1], which only
// matters when a negative entry outweighs the largest positive one.
PhiPair phi_normalize(const std::vector<double>& dzeta_dm, const std::vector<double>& dzeta_dd);

enum class PhiMode {
    kSigned,     // window endpoints multiplied by phi, then ordered
    kMagnitude,  // window endpoints multiplied by |phi|
    kOff,        // phi ignored
};

// Base window [lo, hi] (lo <= 0 <= hi) scaled by phi and by a per-gain
// move-limit factor in (0, 1].
StepBounds make_step_bounds(double dm_lo, double dm_hi, double dd_lo, double dd_hi, const PhiPair& phi, PhiMode mode,
                            const std::vector<double>& scale_m, const std::vector<double>& scale_d);

// Which units carry decision variables and how every unit weighs into the
// aggregates.
struct GainLayout {
    std::vector<int> units;       // controllable units
    std::vector<double> weights;  // p_g / sum(p_g), every unit

    static GainLayout from_case(const GridCase& grid);
};

enum class RocofRowForm {
    kExact,   // M_new >= f0 |dP| / limit, scaled by the current M
    kTaylor,  // first-order expansion of f0 dP / M around the current M
};

struct FreqInputs {
    bool enabled = true;
    AggregateParams agg;
    NadirEstimate nadir;
    double rocof_limit = 1.0;  // Hz/s
    double nadir_limit = 0.8;  // Hz
    RocofRowForm rocof_form = RocofRowForm::kExact;
    double eps_tm = 1e-6;
};

// Evaluates the aggregate, its nadir estimate and gradient at `alloc`.
FreqInputs make_freq_inputs(const GridCase& grid, const AllocationState& alloc, double dP_system,
                            double rocof_limit, double nadir_limit, bool enabled,
                            RocofRowForm form = RocofRowForm::kExact);

LinearProgram build_step1(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                          const StepBounds& bounds, double filter_tol = 1e-9);

LinearProgram build_step2(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                          const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                          double zeta_floor, double filter_tol = 1e-9);

LinearProgram build_step3(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                          const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                          double zeta_floor, double filter_tol = 1e-9);

LinearProgram build_uniform(const ModeSet& modes, const AllocationState& alloc, const GainLayout& layout,
                            const FreqInputs& freq, const CostConfig& costs, const StepBounds& bounds,
                            double zeta_floor, double filter_tol = 1e-9);

// Increments read back from a solved program, in GainLayout order.
struct GainStep {
    std::vector<double> dm;
    std::vector<double> dd;
};

GainStep extract_step(const LinearProgram& lp, const LpSolution& sol, const GainLayout& layout);

}  // namespace vsmalloc
