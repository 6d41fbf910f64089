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
#include <complex>
#include <vector>

#include "vsmalloc/grid_model.hpp"

namespace vsmalloc {

enum class GainKind { kInertia = 0, kDamping = 1 };

// Column of a sensitivity matrix for (unit, kind): inertia and damping gains
// of unit j sit next to each other.
constexpr int gain_index(int unit, GainKind kind) { return 2 * unit + static_cast<int>(kind); }

struct ModeSet {
    Eigen::VectorXcd lambdas;
    Eigen::MatrixXcd right_vecs;  // column i is u_i
    Eigen::MatrixXcd left_vecs;   // column i is v_i, scaled so v_i^T u_k = delta_ik
    Eigen::VectorXd zetas;
    // Rows are modes, columns are gains (see gain_index). Empty when the
    // decomposition was requested without sensitivities.
    Eigen::MatrixXd dsigma;
    Eigen::MatrixXd domega;
    Eigen::MatrixXd dzeta;
    double a_norm = 0.0;  // Frobenius norm of the decomposed matrix

    Eigen::Index size() const { return lambdas.size(); }
    double sigma(Eigen::Index i) const { return lambdas(i).real(); }
    double omega(Eigen::Index i) const { return lambdas(i).imag(); }
};

struct DecomposeOptions {
    bool sensitivities = true;
    double defect_tol = 1e-8;  // relative to the Frobenius norm of A
};

// Eigenvalues are returned sorted by decreasing real part, then decreasing
// imaginary part, so every call on the same matrix yields the same order.
ModeSet decompose(const LinearModel& model, const DecomposeOptions& options = {});
ModeSet decompose(const Eigen::MatrixXd& a, const DecomposeOptions& options = {});

// v_i^T dA u_i
std::complex<double> eig_sensitivity(const ModeSet& modes, const Eigen::MatrixXd& dA, Eigen::Index mode);

double zeta_sensitivity(const ModeSet& modes, Eigen::Index mode, double dsigma, double domega);

// Damping ratio of a single eigenvalue; 0 for the origin.
double damping_ratio(std::complex<double> lambda);

// Fills dsigma/domega/dzeta for all gains of every unit of the model.
void compute_sensitivities(ModeSet& modes, const LinearModel& model);

struct WorstModes {
    double sigma_max = 0.0;
    double zeta_min = 0.0;
    Eigen::Index sigma_index = -1;
    Eigen::Index zeta_index = -1;
};

WorstModes worst_modes(const ModeSet& modes, double filter_tol = 1e-9);

// One representative per conjugate pair (the one with non-negative imaginary
// part) among modes with |lambda| above filter_tol, in ModeSet order.
std::vector<Eigen::Index> constraint_modes(const ModeSet& modes, double filter_tol = 1e-9);

// For each mode of `previous`, the index of the mode of `current` it most
// likely continues, by greedy maximal |v_prev^T u_cur| / (|v_prev| |u_cur|).
std::vector<Eigen::Index> match_modes(const ModeSet& previous, const ModeSet& current);

}  // namespace vsmalloc
