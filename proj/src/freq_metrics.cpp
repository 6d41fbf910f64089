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

#include "vsmalloc/freq_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace vsmalloc {

namespace {

std::string describe(const AggregateParams& p) {
    std::ostringstream out;
    out.precision(8);
    out << "(M=" << p.M << ", D=" << p.D << ", R_g=" << p.R_g << ", F_g=" << p.F_g << ", T=" << p.T << ")";
    return out.str();
}

}  // namespace

bool has_governor(const AggregateParams& p) { return p.R_g > 0.0 || p.F_g > 0.0; }

double rocof(const AggregateParams& p) {
    if (!(p.M > 0.0)) throw FreqMetricError(FreqErrc::kInvalidParams, "rocof: M must be > 0 " + describe(p));
    return -p.f0 * p.dP / p.M;
}

NadirResult nadir(const AggregateParams& p) {
    if (!(p.M > 0.0) || !(p.T > 0.0) || !(p.D + p.R_g > 0.0) || !(p.R_g > p.F_g)) {
        throw FreqMetricError(FreqErrc::kInvalidParams,
                              "nadir: requires M > 0, T > 0, D + R_g > 0 and R_g > F_g " + describe(p));
    }
    if (!(p.M / p.T - p.F_g < p.D)) {
        throw FreqMetricError(FreqErrc::kNadirTimeInvalid, "nadir: M/T - F_g >= D, nadir time invalid " + describe(p));
    }
    NadirResult r;
    const double stiffness = p.D + p.R_g;
    r.omega_n = std::sqrt(stiffness / (p.M * p.T));
    r.zeta_s = (p.M + p.T * (p.D + p.F_g)) / (2.0 * std::sqrt(p.M * p.T * stiffness));
    if (!(r.zeta_s < 1.0)) {
        throw FreqMetricError(FreqErrc::kOverdamped, "nadir: overdamped aggregate response " + describe(p));
    }
    const double omega_d = r.omega_n * std::sqrt(1.0 - r.zeta_s * r.zeta_s);
    double phase = std::atan2(omega_d, r.zeta_s * r.omega_n - 1.0 / p.T);
    if (phase < 0.0) phase += std::numbers::pi;
    r.t_m = phase / omega_d;
    const double overshoot = std::sqrt(p.T * (p.R_g - p.F_g) / p.M) * std::exp(-r.zeta_s * r.omega_n * r.t_m);
    r.nadir = -p.f0 * p.dP / stiffness * (1.0 + overshoot);
    return r;
}

NadirGradient nadir_gradient(const AggregateParams& p, double rel_step) {
    const double h_m = rel_step * std::max(std::abs(p.M), 1.0);
    const double h_d = rel_step * std::max(std::abs(p.D), 1.0);
    AggregateParams lo = p;
    AggregateParams hi = p;
    lo.M -= h_m;
    hi.M += h_m;
    NadirGradient g;
    g.dnadir_dM = (nadir(hi).nadir - nadir(lo).nadir) / (2.0 * h_m);
    lo = p;
    hi = p;
    lo.D -= h_d;
    hi.D += h_d;
    g.dnadir_dD = (nadir(hi).nadir - nadir(lo).nadir) / (2.0 * h_d);
    return g;
}

FreqMetrics freq_metrics(const AggregateParams& p) {
    FreqMetrics f;
    f.rocof_max = rocof(p);
    const NadirResult n = nadir(p);
    f.nadir = n.nadir;
    f.t_m = n.t_m;
    f.zeta_s = n.zeta_s;
    f.omega_n = n.omega_n;
    const NadirGradient g = nadir_gradient(p);
    f.dnadir_dM = g.dnadir_dM;
    f.dnadir_dD = g.dnadir_dD;
    return f;
}

double default_disturbance(const GridCase& grid) {
    for (const auto& u : grid.units) {
        if (u.bus == grid.disturbance_bus) return u.p_g / grid.base_power;
    }
    throw InputError("no unit at disturbance bus " + std::to_string(grid.disturbance_bus) +
                     "; the scenario must give dP explicitly");
}

AggregateParams aggregate(const GridCase& grid, const AllocationState& alloc, double dP_system) {
    if (alloc.m.size() != grid.units.size() || alloc.d.size() != grid.units.size())
        throw InputError("aggregate: allocation does not match the unit list");
    double total = 0.0;
    double m = 0.0;
    double d = 0.0;
    double r = 0.0;
    double f = 0.0;
    double t = 0.0;
    double governed = 0.0;
    for (std::size_t j = 0; j < grid.units.size(); ++j) {
        const auto& u = grid.units[j];
        total += u.p_g;
        m += u.p_g * alloc.m[j];
        d += u.p_g * alloc.d[j];
        if (u.governor) {
            r += u.p_g * u.governor->r_inv;
            f += u.p_g * u.governor->f_frac;
            t += u.p_g * u.governor->T;
            governed += u.p_g;
        }
    }
    if (!(total > 0.0)) throw InputError("aggregate: total dispatched generation is zero");
    AggregateParams p;
    p.M = m / total;
    p.D = d / total;
    p.R_g = r / total;
    p.F_g = f / total;
    p.T = governed > 0.0 ? t / governed : 0.0;
    p.f0 = grid.f0;
    p.dP = dP_system * grid.base_power / total;
    return p;
}

NadirEstimate nadir_estimate(const AggregateParams& p) {
    if (has_governor(p)) {
        try {
            const NadirResult n = nadir(p);
            const NadirGradient g = nadir_gradient(p);
            return {NadirRegime::kOscillatory, n.nadir, g.dnadir_dM, g.dnadir_dD};
        } catch (const FreqMetricError& e) {
            if (e.code() == FreqErrc::kInvalidParams) throw;
        }
    }
    const double stiffness = p.D + p.R_g;
    if (!(stiffness > 0.0))
        throw FreqMetricError(FreqErrc::kInvalidParams, "nadir: D + R_g must be > 0 " + describe(p));
    NadirEstimate e;
    e.regime = NadirRegime::kSteadyState;
    e.nadir = -p.f0 * p.dP / stiffness;
    e.dnadir_dM = 0.0;
    e.dnadir_dD = p.f0 * p.dP / (stiffness * stiffness);
    return e;
}

LinearModel aggregate_response_model(const AggregateParams& p) {
    if (!(p.M > 0.0)) throw InputError("aggregate model: M must be > 0");
    LinearModel model;
    const bool governed = has_governor(p);
    if (governed && !(p.T > 0.0)) throw InputError("aggregate model: governor needs T > 0");
    const Eigen::Index n = governed ? 2 : 1;
    model.A = Eigen::MatrixXd::Zero(n, n);
    model.B = Eigen::MatrixXd::Zero(n, 1);
    model.C = Eigen::MatrixXd::Zero(1, n);
    model.D = Eigen::MatrixXd::Zero(1, 1);
    model.A(0, 0) = -(p.D + p.F_g) / p.M;
    model.B(0, 0) = -1.0 / p.M;
    model.C(0, 0) = p.f0;
    model.state_labels.push_back({0, "speed"});
    model.speed_state.push_back(0);
    if (governed) {
        model.A(0, 1) = 1.0 / p.M;
        model.A(1, 0) = -(p.R_g - p.F_g) / p.T;
        model.A(1, 1) = -1.0 / p.T;
        model.state_labels.push_back({0, "governor"});
    }
    return model;
}

}  // namespace vsmalloc
