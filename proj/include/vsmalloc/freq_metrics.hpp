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

#include <string>

#include "vsmalloc/error.hpp"
#include "vsmalloc/grid_model.hpp"

namespace vsmalloc {

// System-wide averages driving the single-machine frequency response.
struct AggregateParams {
    double M = 0.0;    // s
    double D = 0.0;    // p.u.
    double R_g = 0.0;  // p.u.
    double F_g = 0.0;
    double T = 0.0;    // s; zero when no unit carries a governor
    double f0 = 50.0;  // Hz
    double dP = 0.0;   // p.u. on total dispatched generation; positive = loss of generation
};

struct FreqMetrics {
    double rocof_max = 0.0;  // Hz/s
    double nadir = 0.0;      // Hz, negative for a loss of generation
    double t_m = 0.0;        // s
    double zeta_s = 0.0;
    double omega_n = 0.0;    // rad/s
    double dnadir_dM = 0.0;
    double dnadir_dD = 0.0;
};

enum class FreqErrc {
    kInvalidParams,     // M <= 0, D + R_g <= 0, R_g <= F_g, ...
    kNadirTimeInvalid,  // M/T - F_g >= D: the nadir-time expression has no valid root
    kOverdamped,        // zeta_s >= 1: no oscillatory overshoot
};

class FreqMetricError : public Error {
 public:
    FreqMetricError(FreqErrc code, const std::string& what) : Error(what), code_(code) {}
    FreqErrc code() const noexcept { return code_; }

 private:
    FreqErrc code_;
};

struct NadirResult {
    double nadir = 0.0;
    double t_m = 0.0;
    double zeta_s = 0.0;
    double omega_n = 0.0;
};

double rocof(const AggregateParams& p);
NadirResult nadir(const AggregateParams& p);

struct NadirGradient {
    double dnadir_dM = 0.0;
    double dnadir_dD = 0.0;
};

// Central differences of the closed form, relative step `rel_step`.
NadirGradient nadir_gradient(const AggregateParams& p, double rel_step = 1e-6);

// Everything above in one record; throws like nadir().
FreqMetrics freq_metrics(const AggregateParams& p);

// p_g-weighted averages over all units. `dP_system` is the disturbance in p.u.
// on the case base power; it is rescaled to the total dispatched generation.
AggregateParams aggregate(const GridCase& grid, const AllocationState& alloc, double dP_system);

// Disturbance used when a scenario leaves dP unspecified: the dispatch of the
// unit at the disturbance bus, in p.u. on the case base power.
double default_disturbance(const GridCase& grid);

bool has_governor(const AggregateParams& p);

// How the optimizer sees the nadir at a point where the closed form may not
// apply. Without primary control, or when the response is overdamped or the
// nadir-time condition fails, the frequency settles monotonically and the
// steady-state deviation -f0 dP / (D + R_g) is used instead.
enum class NadirRegime { kOscillatory, kSteadyState };

struct NadirEstimate {
    NadirRegime regime = NadirRegime::kOscillatory;
    double nadir = 0.0;
    double dnadir_dM = 0.0;
    double dnadir_dD = 0.0;
};

NadirEstimate nadir_estimate(const AggregateParams& p);

// Single-input model of the aggregate swing equation with a lead-lag
// governor. The input is dP, the output the frequency deviation in Hz.
LinearModel aggregate_response_model(const AggregateParams& p);

}  // namespace vsmalloc
