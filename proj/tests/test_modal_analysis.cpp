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

#include <cmath>
#include <complex>

#include "support.hpp"
#include "vsmalloc/error.hpp"
#include "vsmalloc/modal_analysis.hpp"

namespace vsmalloc {
namespace {

using cd = std::complex<double>;

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

TEST(ModalAnalysis, RealDistinctEigenvalues) {
    const auto modes = decompose(mat2(0, 1, -2, -3));
    ASSERT_EQ(modes.size(), 2);
    EXPECT_NEAR(modes.lambdas(0).real(), -1.0, 1e-12);
    EXPECT_NEAR(modes.lambdas(1).real(), -2.0, 1e-12);
    EXPECT_DOUBLE_EQ(modes.zetas(0), 1.0);
    EXPECT_DOUBLE_EQ(modes.zetas(1), 1.0);
}

TEST(ModalAnalysis, UndampedOscillator) {
    const auto modes = decompose(mat2(0, 1, -1, 0));
    EXPECT_NEAR(std::abs(modes.lambdas(0) - cd(0, 1)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(modes.lambdas(1) - cd(0, -1)), 0.0, 1e-12);
    EXPECT_NEAR(modes.zetas(0), 0.0, 1e-12);
    EXPECT_NEAR(modes.zetas(1), 0.0, 1e-12);
}

TEST(ModalAnalysis, DampingRatioArithmetic) {
    EXPECT_NEAR(damping_ratio(cd(-1, 1)), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(damping_ratio(cd(0, 0)), 0.0);
    EXPECT_NEAR(damping_ratio(cd(0.5, 2)), -0.5 / std::sqrt(4.25), 1e-15);
}

TEST(ModalAnalysis, ScalarSensitivity) {
    Eigen::MatrixXd a(1, 1), da(1, 1);
    a << -1.0;
    da << -1.0;
    const auto modes = decompose(a);
    const cd s = eig_sensitivity(modes, da, 0);
    EXPECT_NEAR(s.real(), -1.0, 1e-15);
    EXPECT_NEAR(s.imag(), 0.0, 1e-15);
}

TEST(ModalAnalysis, OscillatorSensitivityMatchesImplicitDifferentiation) {
    // s^2 + c s + 1 = 0 gives dlambda/dc = -lambda / (2 lambda + c).
    const double c = 1.0;
    const auto modes = decompose(mat2(0, 1, -1, -c));
    const Eigen::MatrixXd da = mat2(0, 0, 0, -1);
    for (Eigen::Index i = 0; i < 2; ++i) {
        const cd lambda = modes.lambdas(i);
        const cd oracle = -lambda / (2.0 * lambda + c);
        const cd got = eig_sensitivity(modes, da, i);
        EXPECT_NEAR(std::abs(got - oracle), 0.0, 1e-12);
    }
    // The upper root (-1 + j sqrt 3) / 2.
    EXPECT_NEAR(eig_sensitivity(modes, da, 0).real(), -0.5, 1e-12);
    EXPECT_NEAR(eig_sensitivity(modes, da, 0).imag(), -0.28867513459481287, 1e-12);
}

TEST(ModalAnalysis, ZeroPerturbationGivesZero) {
    const auto modes = decompose(mat2(0, 1, -1, -0.3));
    EXPECT_EQ(eig_sensitivity(modes, Eigen::MatrixXd::Zero(2, 2), 0), cd(0, 0));
}

TEST(ModalAnalysis, SensitivityIsLinearInPerturbation) {
    const auto file = testing::shipped_case();
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    const auto modes = decompose(model);
    for (Eigen::Index i = 0; i < modes.size(); ++i) {
        const cd one = eig_sensitivity(modes, model.dA_dd[3], i);
        const cd scaled = eig_sensitivity(modes, 7.5 * model.dA_dd[3], i);
        EXPECT_NEAR(std::abs(scaled - 7.5 * one), 0.0, 1e-13 * std::max(1.0, std::abs(scaled)));
    }
}

TEST(ModalAnalysis, ZetaSensitivityFormula) {
    const auto real_modes = decompose(mat2(-1, 0, 0, -3));
    EXPECT_EQ(zeta_sensitivity(real_modes, 0, -5.0, 0.0), 0.0);

    const auto modes = decompose(mat2(-1, 1, -1, -1));  // -1 +/- j
    ASSERT_NEAR(modes.omega(0), 1.0, 1e-12);
    EXPECT_NEAR(zeta_sensitivity(modes, 0, -1.0, 0.0), std::pow(2.0, -1.5), 1e-12);
}

TEST(ModalAnalysis, ZetaSensitivityMatchesFiniteDifference) {
    auto zeta_at = [](double c) { return decompose(mat2(0, 1, -1, -c), {false}).zetas(0); };
    const double c = 0.4;
    const auto modes = decompose(mat2(0, 1, -1, -c));
    const cd dl = eig_sensitivity(modes, mat2(0, 0, 0, -1), 0);
    const double analytic = zeta_sensitivity(modes, 0, dl.real(), dl.imag());
    const double h = 1e-6;
    const double fd = (zeta_at(c + h) - zeta_at(c - h)) / (2 * h);
    EXPECT_LT(testing::rel_err(analytic, fd), 1e-6);
    EXPECT_NEAR(analytic, 0.5, 1e-9);  // zeta = c / 2 for this oscillator
}

TEST(ModalAnalysis, WorstModesExamples) {
    const auto a = decompose(mat2(0, 1, -2, -3));
    const auto w = worst_modes(a);
    EXPECT_NEAR(w.sigma_max, -1.0, 1e-12);
    EXPECT_DOUBLE_EQ(w.zeta_min, 1.0);

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
    b.topLeftCorner(2, 2) = mat2(-0.01, 1, -1, -0.01);
    b(2, 2) = -5.0;
    const auto wb = worst_modes(decompose(b));
    EXPECT_NEAR(wb.zeta_min, 0.01 / std::sqrt(1.0001), 1e-12);
    EXPECT_NEAR(wb.zeta_min, 0.0099995, 1e-7);
}

TEST(ModalAnalysis, NumericalZeroModeIsFiltered) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 0) = 1e-12;
    a(1, 1) = -2.0;
    a(2, 2) = -3.0;
    const auto modes = decompose(a);
    const auto w = worst_modes(modes, 1e-9);
    EXPECT_DOUBLE_EQ(w.zeta_min, 1.0);
    EXPECT_EQ(constraint_modes(modes, 1e-9).size(), 2u);
    EXPECT_NEAR(w.sigma_max, 1e-12, 1e-20);  // sigma_max still sees every mode
}

TEST(ModalAnalysis, EverythingFilteredIsAnError) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 1);
    EXPECT_THROW(worst_modes(decompose(a)), NumericalError);
}

TEST(ModalAnalysis, DefectiveMatrixRejectedWithEigenvalues) {
    try {
        decompose(mat2(-1, 1, 0, -1));
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("(-1,0)"), std::string::npos) << e.what();
    }
}

TEST(ModalAnalysis, NonFiniteOrNonSquareRejected) {
    Eigen::MatrixXd a = mat2(0, 1, -1, 0);
    a(0, 0) = std::nan("");
    EXPECT_THROW(decompose(a), InputError);
    EXPECT_THROW(decompose(Eigen::MatrixXd::Zero(2, 3)), InputError);
    EXPECT_THROW(eig_sensitivity(decompose(mat2(-1, 0, 0, -2)), Eigen::MatrixXd::Zero(2, 2), 5), InputError);
}

class TwelveBusModes : public ::testing::TestWithParam<const char*> {};

TEST_P(TwelveBusModes, Invariants) {
    const auto file = testing::shipped_case(GetParam());
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    const auto modes = decompose(model);
    const Eigen::Index n = modes.size();
    const double a_norm = model.A.norm();

    // Bi-orthonormality and eigen-residuals.
    const Eigen::MatrixXcd vtu = modes.left_vecs.transpose() * modes.right_vecs;
    EXPECT_LT((vtu - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-8);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXcd r = model.A.cast<cd>() * modes.right_vecs.col(i) - modes.lambdas(i) * modes.right_vecs.col(i);
        EXPECT_LT(r.norm(), 1e-8 * a_norm);
    }
    // Reconstruction.
    const Eigen::MatrixXcd rebuilt = modes.right_vecs * modes.lambdas.asDiagonal() * modes.left_vecs.transpose();
    EXPECT_LT((rebuilt - model.A.cast<cd>()).norm(), 1e-8 * a_norm);

    for (Eigen::Index i = 0; i < n; ++i) {
        EXPECT_GE(modes.zetas(i), -1.0);
        EXPECT_LE(modes.zetas(i), 1.0);
        if (modes.sigma(i) != 0.0) {
            EXPECT_EQ(std::signbit(modes.zetas(i)), !std::signbit(modes.sigma(i)));
        }
    }
    // Conjugate pairs carry equal ratios and sensitivities.
    for (Eigen::Index i = 0; i < n; ++i) {
        if (modes.omega(i) <= 0.0) continue;
        Eigen::Index partner = -1;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (std::abs(modes.lambdas(k) - std::conj(modes.lambdas(i))) < 1e-9 * a_norm) partner = k;
        }
        ASSERT_GE(partner, 0);
        EXPECT_NEAR(modes.zetas(i), modes.zetas(partner), 1e-12);
        EXPECT_LT((modes.dsigma.row(i) - modes.dsigma.row(partner)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((modes.dzeta.row(i) - modes.dzeta.row(partner)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST_P(TwelveBusModes, SensitivitiesMatchRelinearizedDifferences) {
    const auto file = testing::shipped_case(GetParam());
    const auto alloc = AllocationState::from_case(file.grid);
    const auto model = linearize(file.grid, alloc);
    const auto modes = decompose(model);
    const auto within = [](double analytic, double fd) {
        return std::abs(analytic - fd) <= 1e-5 * std::abs(fd) + 1e-8;
    };
    // Central difference at h = 1e-6. Entries that miss fall back to h = 1e-5,
    // where the rounding error in the perturbed spectra is ten times smaller.
    const auto central = [&](int j, GainKind kind, double h) {
        const double dm = kind == GainKind::kInertia ? h : 0.0;
        const double dd = kind == GainKind::kDamping ? h : 0.0;
        const auto plus = decompose(perturb_gain(model, j, dm, dd), {false});
        const auto minus = decompose(perturb_gain(model, j, -dm, -dd), {false});
        const auto mp = match_modes(modes, plus);
        const auto mm = match_modes(modes, minus);
        Eigen::MatrixXd fd(modes.size(), 2);
        for (Eigen::Index i = 0; i < modes.size(); ++i) {
            fd(i, 0) = (plus.sigma(mp[i]) - minus.sigma(mm[i])) / (2 * h);
            fd(i, 1) = (plus.zetas(mp[i]) - minus.zetas(mm[i])) / (2 * h);
        }
        return fd;
    };
    int fallbacks = 0;
    for (int j : controllable_units(file.grid)) {
        for (GainKind kind : {GainKind::kInertia, GainKind::kDamping}) {
            const int g = gain_index(j, kind);
            const Eigen::MatrixXd fine = central(j, kind, 1e-6);
            Eigen::MatrixXd coarse;
            for (Eigen::Index i = 0; i < modes.size(); ++i) {
                const double analytic[2] = {modes.dsigma(i, g), modes.dzeta(i, g)};
                for (int q = 0; q < 2; ++q) {
                    if (within(analytic[q], fine(i, q))) continue;
                    if (coarse.size() == 0) coarse = central(j, kind, 1e-5);
                    ++fallbacks;
                    EXPECT_TRUE(within(analytic[q], coarse(i, q)))
                        << (q == 0 ? "dsigma" : "dzeta") << " mode " << i << " gain " << g << ": analytic "
                        << analytic[q] << ", fd(1e-6) " << fine(i, q) << ", fd(1e-5) " << coarse(i, q);
                }
            }
        }
    }
    RecordProperty("fallbacks", fallbacks);
}

INSTANTIATE_TEST_SUITE_P(Variants, TwelveBusModes, ::testing::Values("low_inertia", "no_inertia"));

TEST(ModalAnalysis, MatchingIsIdentityOnItself) {
    const auto file = testing::shipped_case();
    const auto modes = decompose(linearize(file.grid, AllocationState::from_case(file.grid)));
    const auto match = match_modes(modes, modes);
    for (Eigen::Index i = 0; i < modes.size(); ++i) EXPECT_EQ(match[i], i);
}

TEST(ModalAnalysis, OrderingIsDeterministic) {
    const auto file = testing::shipped_case("no_inertia");
    const auto model = linearize(file.grid, AllocationState::from_case(file.grid));
    const auto a = decompose(model);
    const auto b = decompose(model);
    EXPECT_EQ(a.lambdas, b.lambdas);
    EXPECT_EQ(a.dzeta, b.dzeta);
    for (Eigen::Index i = 1; i < a.size(); ++i) EXPECT_GE(a.sigma(i - 1), a.sigma(i));
}

}  // namespace
}  // namespace vsmalloc
