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

#include "vsmalloc/modal_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "vsmalloc/error.hpp"

namespace vsmalloc {

double damping_ratio(std::complex<double> lambda) {
    const double mag = std::abs(lambda);
    return mag > 0.0 ? -lambda.real() / mag : 0.0;
}

ModeSet decompose(const Eigen::MatrixXd& a, const DecomposeOptions& options) {
    if (a.rows() != a.cols()) throw InputError("decompose: matrix is not square");
    if (!a.allFinite()) throw InputError("decompose: matrix has non-finite entries");

    ModeSet modes;
    modes.a_norm = a.norm();
    const Eigen::Index n = a.rows();
    if (n == 0) return modes;

    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
    if (solver.info() != Eigen::Success) throw NumericalError("decompose: eigenvalue iteration did not converge");

    const Eigen::VectorXcd raw_lambda = solver.eigenvalues();
    const Eigen::MatrixXcd raw_vecs = solver.eigenvectors();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        const auto& lx = raw_lambda(x);
        const auto& ly = raw_lambda(y);
        if (lx.real() != ly.real()) return lx.real() > ly.real();
        return lx.imag() > ly.imag();
    });

    modes.lambdas.resize(n);
    modes.right_vecs.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        modes.lambdas(i) = raw_lambda(order[static_cast<std::size_t>(i)]);
        modes.right_vecs.col(i) = raw_vecs.col(order[static_cast<std::size_t>(i)]);
    }

    const double cluster_tol = options.defect_tol * std::max(modes.a_norm, 1e-300);
    std::vector<std::string> clusters;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = i + 1; k < n; ++k) {
            if (std::abs(modes.lambdas(i) - modes.lambdas(k)) < cluster_tol) {
                std::ostringstream out;
                out.precision(10);
                out << modes.lambdas(i) << " ~ " << modes.lambdas(k);
                clusters.push_back(out.str());
            }
        }
    }
    if (!clusters.empty()) {
        std::string text = "decompose: defective or repeated eigenvalues:";
        for (const auto& c : clusters) text += " " + c;
        throw NumericalError(text);
    }

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(modes.right_vecs);
    const Eigen::MatrixXcd inverse = lu.inverse();
    if (!inverse.allFinite()) throw NumericalError("decompose: eigenvector matrix is singular");
    modes.left_vecs = inverse.transpose();

    modes.zetas.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) modes.zetas(i) = damping_ratio(modes.lambdas(i));
    return modes;
}

std::complex<double> eig_sensitivity(const ModeSet& modes, const Eigen::MatrixXd& dA, Eigen::Index mode) {
    if (mode < 0 || mode >= modes.size()) throw InputError("eig_sensitivity: mode index out of range");
    if (dA.rows() != modes.size() || dA.cols() != modes.size())
        throw InputError("eig_sensitivity: perturbation has the wrong shape");
    const Eigen::VectorXcd du = dA.cast<std::complex<double>>() * modes.right_vecs.col(mode);
    return modes.left_vecs.col(mode).transpose() * du;
}

double zeta_sensitivity(const ModeSet& modes, Eigen::Index mode, double dsigma, double domega) {
    if (mode < 0 || mode >= modes.size()) throw InputError("zeta_sensitivity: mode index out of range");
    const double s = modes.sigma(mode);
    const double w = modes.omega(mode);
    const double mag2 = s * s + w * w;
    if (mag2 == 0.0) throw NumericalError("zeta_sensitivity: undefined for an eigenvalue at the origin");
    return w * (s * domega - w * dsigma) / std::pow(mag2, 1.5);
}

void compute_sensitivities(ModeSet& modes, const LinearModel& model) {
    const Eigen::Index n = modes.size();
    const auto units = static_cast<Eigen::Index>(model.dA_dm.size());
    modes.dsigma = Eigen::MatrixXd::Zero(n, 2 * units);
    modes.domega = Eigen::MatrixXd::Zero(n, 2 * units);
    modes.dzeta = Eigen::MatrixXd::Zero(n, 2 * units);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool at_origin = std::abs(modes.lambdas(i)) == 0.0;
        for (Eigen::Index j = 0; j < units; ++j) {
            const Eigen::MatrixXd* derivs[2] = {&model.dA_dm[static_cast<std::size_t>(j)],
                                                &model.dA_dd[static_cast<std::size_t>(j)]};
            for (int kind = 0; kind < 2; ++kind) {
                const Eigen::Index g = 2 * j + kind;
                const std::complex<double> dl = eig_sensitivity(modes, *derivs[kind], i);
                modes.dsigma(i, g) = dl.real();
                modes.domega(i, g) = dl.imag();
                modes.dzeta(i, g) = at_origin ? 0.0 : zeta_sensitivity(modes, i, dl.real(), dl.imag());
            }
        }
    }
}

ModeSet decompose(const LinearModel& model, const DecomposeOptions& options) {
    ModeSet modes = decompose(model.A, options);
    if (options.sensitivities) compute_sensitivities(modes, model);
    return modes;
}

WorstModes worst_modes(const ModeSet& modes, double filter_tol) {
    WorstModes worst;
    for (Eigen::Index i = 0; i < modes.size(); ++i) {
        if (worst.sigma_index < 0 || modes.sigma(i) > worst.sigma_max) {
            worst.sigma_max = modes.sigma(i);
            worst.sigma_index = i;
        }
        if (std::abs(modes.lambdas(i)) <= filter_tol) continue;
        if (worst.zeta_index < 0 || modes.zetas(i) < worst.zeta_min) {
            worst.zeta_min = modes.zetas(i);
            worst.zeta_index = i;
        }
    }
    if (worst.zeta_index < 0) throw NumericalError("worst_modes: every mode was removed by the magnitude filter");
    return worst;
}

std::vector<Eigen::Index> constraint_modes(const ModeSet& modes, double filter_tol) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < modes.size(); ++i) {
        if (std::abs(modes.lambdas(i)) <= filter_tol) continue;
        if (modes.omega(i) < 0.0) continue;
        out.push_back(i);
    }
    return out;
}

std::vector<Eigen::Index> match_modes(const ModeSet& previous, const ModeSet& current) {
    const Eigen::Index n = previous.size();
    const Eigen::Index m = current.size();
    std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(n * m));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double vnorm = previous.left_vecs.col(i).norm();
        for (Eigen::Index k = 0; k < m; ++k) {
            const std::complex<double> overlap = previous.left_vecs.col(i).transpose() * current.right_vecs.col(k);
            const double denom = vnorm * current.right_vecs.col(k).norm();
            pairs.emplace_back(denom > 0.0 ? std::abs(overlap) / denom : 0.0, i, k);
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
        if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
        if (std::get<1>(x) != std::get<1>(y)) return std::get<1>(x) < std::get<1>(y);
        return std::get<2>(x) < std::get<2>(y);
    });
    std::vector<Eigen::Index> match(static_cast<std::size_t>(n), -1);
    std::vector<bool> taken(static_cast<std::size_t>(m), false);
    for (const auto& [corr, i, k] : pairs) {
        if (match[static_cast<std::size_t>(i)] >= 0 || taken[static_cast<std::size_t>(k)]) continue;
        match[static_cast<std::size_t>(i)] = k;
        taken[static_cast<std::size_t>(k)] = true;
    }
    return match;
}

}  // namespace vsmalloc
