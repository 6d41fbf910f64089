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
#include <ostream>
#include <string>
#include <vector>

#include "vsmalloc/grid_model.hpp"

namespace vsmalloc {

struct Trajectory {
    std::vector<double> t;
    Eigen::MatrixXd y;  // one row per sample, one column per output
};

// Fixed-step classical RK4 on x' = A x + B u with u held at dP from t = 0
// and x(0) = 0. Samples every step, including t = 0.
Trajectory step_response(const LinearModel& model, double dP, double horizon = 30.0, double dt = 1e-3);

struct ImpulseEnergy {
    double energy = 0.0;
    bool horizon_short = false;  // horizon below five slowest time constants
};

// sqrt of the summed output energy over every input channel, with each
// impulse represented by x(0) = B column. Trapezoidal accumulation.
ImpulseEnergy impulse_energy(const LinearModel& model, double horizon, double dt);

// 10 / |Re lambda| of the slowest mode.
double suggested_impulse_horizon(const LinearModel& model);

// Columns t, then one per output named by `labels` (y_1.. when empty),
// 12 significant digits, LF line endings.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::string>& labels = {});

}  // namespace vsmalloc
