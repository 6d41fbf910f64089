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

#include "vsmalloc/time_sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "vsmalloc/error.hpp"
#include "vsmalloc/simd/kernels.hpp"

namespace vsmalloc {

namespace {

// Row-major copy of A so the kernel sees contiguous rows.
class Rhs {
 public:
    Rhs(const Eigen::MatrixXd& a, Eigen::VectorXd forcing) : n_(a.rows()), a_(a.size()), forcing_(std::move(forcing)) {
        for (Eigen::Index r = 0; r < n_; ++r)
            for (Eigen::Index c = 0; c < n_; ++c) a_[static_cast<std::size_t>(r * n_ + c)] = a(r, c);
    }

    void operator()(const Eigen::VectorXd& x, Eigen::VectorXd& dx) const {
        simd::gemv(a_.data(), static_cast<std::size_t>(n_), static_cast<std::size_t>(n_), x.data(), dx.data());
        dx += forcing_;
    }

 private:
    Eigen::Index n_;
    std::vector<double> a_;
    Eigen::VectorXd forcing_;
};

class Rk4 {
 public:
    Rk4(const Eigen::MatrixXd& a, Eigen::VectorXd forcing)
        : f_(a, std::move(forcing)), k1_(a.rows()), k2_(a.rows()), k3_(a.rows()), k4_(a.rows()), tmp_(a.rows()) {}

    void step(Eigen::VectorXd& x, double dt) {
        f_(x, k1_);
        tmp_ = x + 0.5 * dt * k1_;
        f_(tmp_, k2_);
        tmp_ = x + 0.5 * dt * k2_;
        f_(tmp_, k3_);
        tmp_ = x + dt * k3_;
        f_(tmp_, k4_);
        x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

 private:
    Rhs f_;
    Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

constexpr double kDivergence = 1e12;

long step_count(double horizon, double dt) {
    if (!(dt > 0.0)) throw InputError("simulation step dt must be > 0");
    if (!(horizon > dt)) throw InputError("simulation horizon must exceed dt");
    return std::lround(horizon / dt);
}

}  // namespace

Trajectory step_response(const LinearModel& model, double dP, double horizon, double dt) {
    const long steps = step_count(horizon, dt);
    const Eigen::Index n = model.A.rows();
    if (model.B.cols() < 1 || model.B.rows() != n) throw InputError("step_response: model has no input channel");
    Rk4 rk(model.A, model.B.col(0) * dP);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Trajectory traj;
    traj.t.reserve(static_cast<std::size_t>(steps + 1));
    traj.y.resize(steps + 1, model.C.rows());
    const Eigen::VectorXd feedthrough = model.D.col(0) * dP;
    for (long k = 0; k <= steps; ++k) {
        if (k > 0) rk.step(x, dt);
        if (!(x.norm() <= kDivergence))
            throw NumericalError("step_response: state diverged at t = " + std::to_string(k * dt) + " s (unstable model)");
        traj.t.push_back(static_cast<double>(k) * dt);
        traj.y.row(k) = (model.C * x + feedthrough).transpose();
    }
    return traj;
}

double suggested_impulse_horizon(const LinearModel& model) {
    if (model.A.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(model.A, false);
    double slowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
        slowest = std::min(slowest, std::abs(solver.eigenvalues()(i).real()));
    if (!(slowest > 0.0)) throw NumericalError("impulse horizon: model has a mode without decay");
    return 10.0 / slowest;
}

ImpulseEnergy impulse_energy(const LinearModel& model, double horizon, double dt) {
    const long steps = step_count(horizon, dt);
    ImpulseEnergy out;
    if (model.A.rows() > 0) out.horizon_short = horizon < 0.5 * suggested_impulse_horizon(model);
    double total = 0.0;
    for (Eigen::Index ch = 0; ch < model.B.cols(); ++ch) {
        Rk4 rk(model.A, Eigen::VectorXd::Zero(model.A.rows()));
        Eigen::VectorXd x = model.B.col(ch);
        double prev = (model.C * x).squaredNorm();
        for (long k = 1; k <= steps; ++k) {
            rk.step(x, dt);
            if (!(x.norm() <= kDivergence)) throw NumericalError("impulse_energy: state diverged (unstable model)");
            const double now = (model.C * x).squaredNorm();
            total += 0.5 * dt * (prev + now);
            prev = now;
        }
    }
    out.energy = std::sqrt(total);
    return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::string>& labels) {
    out << "t";
    for (Eigen::Index c = 0; c < traj.y.cols(); ++c) {
        out << ",";
        if (static_cast<std::size_t>(c) < labels.size()) {
            out << labels[static_cast<std::size_t>(c)];
        } else {
            out << "y_" << (c + 1);
        }
    }
    out << "\n";
    char buf[40];
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g", traj.t[k]);
        out << buf;
        for (Eigen::Index c = 0; c < traj.y.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.12g", traj.y(static_cast<Eigen::Index>(k), c));
            out << "," << buf;
        }
        out << "\n";
    }
}

}  // namespace vsmalloc
