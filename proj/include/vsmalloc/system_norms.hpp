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
#include <vector>

#include "vsmalloc/grid_model.hpp"

namespace vsmalloc {

struct NormReport {
    bool stable = false;
    double h2 = 0.0;    // +inf when unstable
    double hinf = 0.0;  // +inf when unstable
    double hinf_lo = 0.0;
    double hinf_hi = 0.0;
};

// True iff every eigenvalue of A has a strictly negative real part.
bool is_hurwitz(const Eigen::MatrixXd& a);

// Solves A P + P A^T + B B^T = 0 through the vectorized (Kronecker) system.
Eigen::MatrixXd controllability_gramian(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// sqrt(trace(C P C^T)); +inf for an unstable A. Throws InputError if D != 0.
double h2_norm(const LinearModel& model);

struct HinfResult {
    double value = 0.0;  // upper end of the final bracket
    double lo = 0.0;
    double hi = 0.0;
    bool infinite = false;
};

// Bisection on gamma using the imaginary-axis eigenvalues of the Hamiltonian.
// Stops once hi - lo <= tol * hi.
HinfResult hinf_bisection(const LinearModel& model, double tol = 1e-6);
double hinf_norm(const LinearModel& model, double tol = 1e-6);

// Largest singular value of C (jw I - A)^{-1} B + D.
double sigma_max_at(const LinearModel& model, double omega);

NormReport norms(const LinearModel& model, double tol = 1e-6);

}  // namespace vsmalloc
