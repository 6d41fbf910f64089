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
#include <cmath>
#include <random>
#include <string>

#include "vsmalloc/case_io.hpp"
#include "vsmalloc/grid_model.hpp"

namespace vsmalloc::testing {

inline std::string case_path(const std::string& name = "kundur3.json") {
    return std::string(VSMALLOC_CASE_DIR) + "/" + name;
}

inline CaseFile shipped_case(const std::string& variant = "low_inertia") { return load_case(case_path(), variant); }

inline double rel_err(double got, double want, double floor = 1e-12) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

// One converter on a single bus: a lone swing equation m w' = -d w.
inline GridCase single_unit_grid(double m, double d) {
    GridCase g;
    g.name = "single";
    g.buses = {1};
    g.disturbance_bus = 1;
    GenUnit u;
    u.bus = 1;
    u.kind = UnitKind::kGridForming;
    u.p_g = 100.0;
    u.m = m;
    u.d = d;
    u.bounds = GainBounds{0.01, 50.0, 0.0, 50.0};
    g.units = {u};
    return g;
}

// Three converters on a four-bus ring with one passive bus, no governors.
inline GridCase converter_ring(double d) {
    GridCase g;
    g.name = "ring";
    g.buses = {1, 2, 3, 4};
    g.lines = {{1, 2, 8.0}, {2, 3, 5.0}, {3, 4, 6.0}, {4, 1, 4.0}};
    g.disturbance_bus = 1;
    const double m[] = {2.0, 3.0, 4.0};
    for (int k = 0; k < 3; ++k) {
        GenUnit u;
        u.bus = k + 1;
        u.kind = k == 0 ? UnitKind::kGridForming : UnitKind::kGridFollowing;
        u.p_g = 100.0 + 50.0 * k;
        u.m = m[k];
        u.d = d;
        u.bounds = GainBounds{0.1, 20.0, 0.0, 40.0};
        g.units.push_back(u);
    }
    return g;
}

// Random gains inside every converter's box, machines untouched.
inline AllocationState random_allocation(const GridCase& grid, std::mt19937_64& rng, double m_hi = 10.0,
                                         double d_hi = 20.0) {
    AllocationState alloc = AllocationState::from_case(grid);
    for (std::size_t j = 0; j < grid.units.size(); ++j) {
        if (!is_controllable(grid.units[j])) continue;
        const auto& b = alloc.bounds[j];
        std::uniform_real_distribution<double> um(std::max(b.m_lo, 0.5), std::min(b.m_hi, m_hi));
        std::uniform_real_distribution<double> ud(std::max(b.d_lo, 1.0), std::min(b.d_hi, d_hi));
        alloc.m[j] = um(rng);
        alloc.d[j] = ud(rng);
    }
    return alloc;
}

// Stable random state-space model: A = -(shift) I + random, shifted until Hurwitz.
inline LinearModel random_stable_model(std::mt19937_64& rng, int n, int inputs, int outputs) {
    std::normal_distribution<double> g(0.0, 1.0);
    LinearModel model;
    model.A = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return g(rng); });
    Eigen::EigenSolver<Eigen::MatrixXd> es(model.A, false);
    const double top = es.eigenvalues().real().maxCoeff();
    model.A -= (top + 0.2 + 0.5 * std::abs(g(rng))) * Eigen::MatrixXd::Identity(n, n);
    model.B = Eigen::MatrixXd::NullaryExpr(n, inputs, [&]() { return g(rng); });
    model.C = Eigen::MatrixXd::NullaryExpr(outputs, n, [&]() { return g(rng); });
    model.D = Eigen::MatrixXd::Zero(outputs, inputs);
    return model;
}

inline LinearModel state_space(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c) {
    LinearModel model;
    model.D = Eigen::MatrixXd::Zero(c.rows(), b.cols());
    model.A = std::move(a);
    model.B = std::move(b);
    model.C = std::move(c);
    return model;
}

}  // namespace vsmalloc::testing
