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

#include "vsmalloc/system_norms.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "vsmalloc/error.hpp"

namespace vsmalloc {

namespace {

constexpr double kAxisTol = 1e-8;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

Eigen::VectorXcd spectrum(const Eigen::MatrixXd& a) {
    if (a.rows() == 0) return {};
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
    return solver.eigenvalues();
}

double largest_singular(const Eigen::MatrixXcd& g) {
    if (g.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(g);
    return svd.singularValues()(0);
}

double largest_singular(const Eigen::MatrixXd& g) {
    if (g.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
    return svd.singularValues()(0);
}

bool has_axis_eigenvalue(const LinearModel& model, double gamma) {
    const Eigen::Index n = model.A.rows();
    const Eigen::Index p = model.B.cols();
    const Eigen::MatrixXd& a = model.A;
    const Eigen::MatrixXd& b = model.B;
    const Eigen::MatrixXd& c = model.C;
    const Eigen::MatrixXd& d = model.D;
    const Eigen::MatrixXd r = gamma * gamma * Eigen::MatrixXd::Identity(p, p) - d.transpose() * d;
    const Eigen::MatrixXd r_inv = r.inverse();
    const Eigen::MatrixXd a_hat = a + b * r_inv * d.transpose() * c;
    Eigen::MatrixXd h(2 * n, 2 * n);
    h.topLeftCorner(n, n) = a_hat;
    h.topRightCorner(n, n) = b * r_inv * b.transpose();
    h.bottomLeftCorner(n, n) =
        -c.transpose() * (Eigen::MatrixXd::Identity(c.rows(), c.rows()) + d * r_inv * d.transpose()) * c;
    h.bottomRightCorner(n, n) = -a_hat.transpose();
    const Eigen::VectorXcd eig = spectrum(h);
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
        if (std::abs(eig(i).real()) < kAxisTol) return true;
    }
    return false;
}

}  // namespace

bool is_hurwitz(const Eigen::MatrixXd& a) {
    const Eigen::VectorXcd eig = spectrum(a);
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
        if (!(eig(i).real() < 0.0)) return false;
    }
    return true;
}

Eigen::MatrixXd controllability_gramian(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::Index n = a.rows();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    // vec(A P + P A^T) = (I (x) A + A (x) I) vec(P) for column-major vec.
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            k.block(i * n, j * n, n, n) += eye(i, j) * a;
            k.block(i * n, j * n, n, n) += a(i, j) * eye;
        }
    }
    const Eigen::MatrixXd q = b * b.transpose();
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
    const Eigen::VectorXd vec_p = k.partialPivLu().solve(rhs);
    Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(vec_p.data(), n, n);
    return 0.5 * (p + p.transpose());
}

double h2_norm(const LinearModel& model) {
    if (model.D.size() > 0 && model.D.cwiseAbs().maxCoeff() != 0.0)
        throw InputError("h2_norm: feedthrough D is nonzero, the H2 norm is infinite");
    if (model.A.rows() == 0) return 0.0;
    if (!is_hurwitz(model.A)) return kInfinity;
    const Eigen::MatrixXd p = controllability_gramian(model.A, model.B);
    const double energy = (model.C * p * model.C.transpose()).trace();
    return std::sqrt(std::max(energy, 0.0));
}

double sigma_max_at(const LinearModel& model, double omega) {
    const Eigen::Index n = model.A.rows();
    Eigen::MatrixXcd g = model.D.cast<std::complex<double>>();
    if (n > 0) {
        Eigen::MatrixXcd shifted = -model.A.cast<std::complex<double>>();
        shifted.diagonal().array() += std::complex<double>(0.0, omega);
        const Eigen::MatrixXcd x = shifted.partialPivLu().solve(model.B.cast<std::complex<double>>());
        g += model.C.cast<std::complex<double>>() * x;
    }
    return largest_singular(g);
}

HinfResult hinf_bisection(const LinearModel& model, double tol) {
    if (!(tol > 0.0)) throw InputError("hinf_norm: tolerance must be > 0");
    HinfResult res;
    const double d_norm = largest_singular(model.D);
    if (model.A.rows() == 0) {
        res.value = res.lo = res.hi = d_norm;
        return res;
    }
    if (!is_hurwitz(model.A)) {
        res.infinite = true;
        res.value = res.lo = res.hi = kInfinity;
        return res;
    }
    // Lower bound: feedthrough, DC gain, and the gain at each modal frequency.
    double lo = std::max(d_norm, sigma_max_at(model, 0.0));
    const Eigen::VectorXcd eig = spectrum(model.A);
    for (Eigen::Index i = 0; i < eig.size(); ++i) lo = std::max(lo, sigma_max_at(model, std::abs(eig(i).imag())));
    if (lo == 0.0) return res;  // B or C annihilates every mode

    double hi = 2.0 * lo;
    while (has_axis_eigenvalue(model, hi)) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericalError("hinf_norm: no finite upper bound found");
    }
    while (hi - lo > tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (has_axis_eigenvalue(model, mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    res.lo = lo;
    res.hi = hi;
    res.value = hi;
    return res;
}

double hinf_norm(const LinearModel& model, double tol) { return hinf_bisection(model, tol).value; }

NormReport norms(const LinearModel& model, double tol) {
    NormReport rep;
    rep.stable = model.A.rows() == 0 || is_hurwitz(model.A);
    rep.h2 = h2_norm(model);
    const HinfResult h = hinf_bisection(model, tol);
    rep.hinf = h.value;
    rep.hinf_lo = h.lo;
    rep.hinf_hi = h.hi;
    return rep;
}

}  // namespace vsmalloc
