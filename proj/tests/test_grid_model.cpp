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

#include <gtest/gtest.h>

#include <cstring>
#include <numbers>

#include "support.hpp"
#include "vsmalloc/error.hpp"
#include "vsmalloc/grid_model.hpp"

namespace vsmalloc {
namespace {

using testing::converter_ring;
using testing::shipped_case;
using testing::single_unit_grid;

TEST(GridModel, IdentityPerturbationKeepsMatrixBits) {
    const auto file = shipped_case();
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    const auto same = perturb_gain(model, 2, 0.0, 0.0);
    ASSERT_EQ(same.A.rows(), model.A.rows());
    EXPECT_EQ(0, std::memcmp(same.A.data(), model.A.data(), sizeof(double) * model.A.size()));
}

TEST(GridModel, SingleUnitRowScalesWithInverseInertia) {
    const auto grid = single_unit_grid(1.0, 1.0);
    const auto model = linearize(grid, AllocationState::from_case(grid));
    ASSERT_EQ(model.A.rows(), 1);
    EXPECT_DOUBLE_EQ(model.A(0, 0), -1.0);
    const auto heavier = perturb_gain(model, 0, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(heavier.A(0, 0), -0.5);
}

TEST(GridModel, CentralDifferenceReproducesClosedFormDerivatives) {
    const auto file = shipped_case();
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    const double h = 1e-6;
    for (int j = 0; j < static_cast<int>(file.grid.units.size()); ++j) {
        const Eigen::MatrixXd fd_m =
            (perturb_gain(model, j, h, 0.0).A - perturb_gain(model, j, -h, 0.0).A) / (2.0 * h);
        const Eigen::MatrixXd fd_d =
            (perturb_gain(model, j, 0.0, h).A - perturb_gain(model, j, 0.0, -h).A) / (2.0 * h);
        EXPECT_LE((fd_m - model.dA_dm[j]).norm(), 1e-6 * model.dA_dm[j].norm()) << "unit " << j;
        EXPECT_LE((fd_d - model.dA_dd[j]).norm(), 1e-6 * model.dA_dd[j].norm()) << "unit " << j;
    }
}

TEST(GridModel, SpeedRowTermsScaleAsInverseInertia) {
    const auto file = shipped_case();
    auto alloc = AllocationState::from_case(file.grid);
    const auto base = linearize(file.grid, alloc);
    for (std::size_t j = 0; j < file.grid.units.size(); ++j) {
        auto scaled = alloc;
        scaled.m[j] *= 3.0;
        const auto model = linearize(file.grid, scaled);
        const int w = base.speed_state[j];
        EXPECT_LE((model.A.row(w) - base.A.row(w) / 3.0).norm(), 1e-14 * base.A.row(w).norm());
        EXPECT_NEAR(model.B(w, 0), base.B(w, 0) / 3.0, 1e-15);
        // Other rows do not depend on this unit's inertia.
        for (Eigen::Index r = 0; r < base.A.rows(); ++r) {
            if (r != w) {
                EXPECT_EQ(model.A.row(r), base.A.row(r));
            }
        }
    }
}

TEST(GridModel, UndampedConverterNetworkIsMarginallyStable) {
    const auto grid = converter_ring(0.0);
    const auto model = linearize(grid, AllocationState::from_case(grid));
    Eigen::EigenSolver<Eigen::MatrixXd> es(model.A, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        EXPECT_LT(std::abs(es.eigenvalues()(i).real()), 1e-9);
    }
}

TEST(GridModel, KronReductionIsLaplacian) {
    for (const auto* variant : {"low_inertia", "no_inertia"}) {
        const auto file = shipped_case(variant);
        const Eigen::MatrixXd l = kron_reduce(file.grid);
        ASSERT_EQ(l.rows(), static_cast<Eigen::Index>(file.grid.units.size()));
        EXPECT_LE((l - l.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        for (Eigen::Index i = 0; i < l.rows(); ++i) EXPECT_GT(l(i, i), 0.0);
    }
}

TEST(GridModel, KronReductionOfPathMatchesSeriesSusceptance) {
    // Two units joined through one passive bus: 1/(1/4 + 1/6) = 2.4.
    GridCase g = single_unit_grid(1.0, 1.0);
    g.buses = {1, 2, 3};
    g.lines = {{1, 2, 4.0}, {2, 3, 6.0}};
    GenUnit other = g.units[0];
    other.bus = 3;
    g.units.push_back(other);
    const Eigen::MatrixXd l = kron_reduce(g);
    EXPECT_NEAR(l(0, 0), 2.4, 1e-12);
    EXPECT_NEAR(l(0, 1), -2.4, 1e-12);
}

TEST(GridModel, TwelveBusStateLayout) {
    const auto file = shipped_case("low_inertia");
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    // Five relative angles, six speeds and one governor per machine.
    EXPECT_EQ(model.states(), 13);
    EXPECT_EQ(model.reference_unit, 0);
    EXPECT_EQ(model.B.cols(), 1);
    EXPECT_EQ(model.C.rows(), 6);
    const double omega_base = 2.0 * std::numbers::pi * file.grid.f0;
    EXPECT_DOUBLE_EQ(model.A(0 + 2, model.speed_state[1]), omega_base);  // angle of unit 1
}

TEST(GridModel, DisturbanceAtUnitBusEntersOnlyThatSpeed) {
    const auto file = shipped_case();
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    for (std::size_t j = 0; j < file.grid.units.size(); ++j) {
        const double b = model.B(model.speed_state[j], 0);
        if (file.grid.units[j].bus == file.grid.disturbance_bus) {
            EXPECT_LT(b, 0.0);
        } else {
            EXPECT_EQ(b, 0.0);
        }
    }
}

TEST(GridModel, ValidationCollectsEveryViolation) {
    GridCase g = converter_ring(1.0);
    g.units[1].m = -1.0;
    g.units[2].bounds.reset();
    g.lines.push_back({2, 99, 1.0});
    try {
        validate(g);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        ASSERT_GE(e.violations().size(), 3u);
        const std::string all = e.what();
        EXPECT_NE(all.find("unit 1 (bus 2): m must be > 0"), std::string::npos) << all;
        EXPECT_NE(all.find("unit 2 (bus 3): converter unit needs gain bounds"), std::string::npos) << all;
        EXPECT_NE(all.find("unknown bus"), std::string::npos) << all;
    }
}

TEST(GridModel, DisconnectedNetworkRejected) {
    GridCase g = converter_ring(1.0);
    g.buses.push_back(7);
    EXPECT_THROW(validate(g), InputError);
}

TEST(GridModel, PerturbationToNonPositiveInertiaRejected) {
    const auto grid = single_unit_grid(1.0, 1.0);
    const auto model = linearize(grid, AllocationState::from_case(grid));
    EXPECT_THROW(perturb_gain(model, 0, -1.0, 0.0), InputError);
    EXPECT_THROW(perturb_gain(model, 3, 0.1, 0.0), InputError);
}

TEST(GridModel, UnitKindSpelling) {
    for (auto kind : {UnitKind::kSynchronous, UnitKind::kGridForming, UnitKind::kGridFollowing}) {
        EXPECT_EQ(unit_kind_from_string(to_string(kind)), kind);
    }
    EXPECT_THROW(unit_kind_from_string("VSM"), InputError);
}

TEST(GridModel, ControllableUnitsSkipMachines) {
    const auto low = shipped_case("low_inertia");
    EXPECT_EQ(controllable_units(low.grid), (std::vector<int>{1, 3, 4, 5}));
    const auto none = shipped_case("no_inertia");
    EXPECT_EQ(controllable_units(none.grid).size(), 6u);
}

}  // namespace
}  // namespace vsmalloc
