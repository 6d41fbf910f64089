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
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vsmalloc {

enum class UnitKind { kSynchronous, kGridForming, kGridFollowing };

// Case-file spelling of a unit kind ("SG", "GFM", "GFL").
std::string to_string(UnitKind kind);
UnitKind unit_kind_from_string(const std::string& text);

struct Governor {
    double T = 0.0;       // turbine time constant, s
    double r_inv = 0.0;   // inverse droop gain, p.u. on the unit rating
    double f_frac = 0.0;  // high-pressure turbine fraction

    bool operator==(const Governor&) const = default;
};

struct GainBounds {
    double m_lo = 0.0;
    double m_hi = 0.0;
    double d_lo = 0.0;
    double d_hi = 0.0;

    bool operator==(const GainBounds&) const = default;
};

struct GenUnit {
    int bus = 0;
    UnitKind kind = UnitKind::kGridFollowing;
    double p_g = 0.0;  // dispatched power, MW
    double m = 0.0;    // inertia constant, s (initial value for converters)
    double d = 0.0;    // damping gain, p.u. (initial value for converters)
    // Damping that is part of the unit but not a tunable gain: a machine's
    // stabilizer, or the net contribution of a converter's synchronization
    // loop (may be negative). It acts on the unit's own swing equation and is
    // left out of the aggregate D used by the frequency metrics.
    double d_fixed = 0.0;
    std::optional<Governor> governor;  // synchronous machines only
    std::optional<GainBounds> bounds;  // converters only

    bool operator==(const GenUnit&) const = default;
};

// Converter units carry tunable virtual gains; machines do not.
inline bool is_controllable(const GenUnit& unit) { return unit.kind != UnitKind::kSynchronous; }

struct Line {
    int from = 0;
    int to = 0;
    double b = 0.0;  // series susceptance, p.u. on base_power

    bool operator==(const Line&) const = default;
};

struct GridCase {
    std::string name;
    std::vector<int> buses;
    std::vector<Line> lines;
    std::vector<GenUnit> units;
    double base_power = 100.0;  // MVA
    double f0 = 50.0;           // Hz
    int disturbance_bus = 0;    // bus whose unit receives the power step

    bool operator==(const GridCase&) const = default;
};

// Throws InputError listing every violated invariant.
void validate(const GridCase& grid);

// Gains of every unit (machines included, held fixed) plus the box bounds of
// the controllable ones.
struct AllocationState {
    std::vector<double> m;
    std::vector<double> d;
    std::vector<GainBounds> bounds;  // meaningful for controllable units only
    int iteration = 0;

    static AllocationState from_case(const GridCase& grid);
    bool operator==(const AllocationState&) const = default;
};

// Indices of controllable units in case order.
std::vector<int> controllable_units(const GridCase& grid);

struct StateLabel {
    int unit = 0;
    std::string name;  // "angle", "speed" or "governor"
};

class ModelProvider;

struct LinearModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    std::vector<StateLabel> state_labels;
    // Indexed by unit. Every matrix has nonzeros only in that unit's speed row.
    std::vector<Eigen::MatrixXd> dA_dm;
    std::vector<Eigen::MatrixXd> dA_dd;
    std::vector<int> speed_state;  // state index of each unit's speed
    int reference_unit = 0;

    // Where the model came from, so it can be rebuilt at perturbed gains.
    std::shared_ptr<const ModelProvider> provider;
    AllocationState alloc;

    Eigen::Index states() const { return A.rows(); }
};

// Anything that can produce a parametric linear model for a given allocation.
// A higher-fidelity converter model can be dropped in by implementing this.
class ModelProvider : public std::enable_shared_from_this<ModelProvider> {
 public:
    virtual ~ModelProvider() = default;
    virtual LinearModel linearize(const AllocationState& alloc) const = 0;
    virtual const GridCase& grid() const = 0;
};

// Reduced multi-machine swing model: angle and speed per unit, one governor
// state per machine, network folded onto the unit buses by Kron reduction.
class SwingModelProvider final : public ModelProvider {
 public:
    static std::shared_ptr<const SwingModelProvider> create(GridCase grid);

    LinearModel linearize(const AllocationState& alloc) const override;
    const GridCase& grid() const override { return grid_; }
    const Eigen::MatrixXd& reduced_laplacian() const { return laplacian_; }

 private:
    explicit SwingModelProvider(GridCase grid);

    GridCase grid_;
    Eigen::MatrixXd laplacian_;  // unit x unit, in unit order
};

// Susceptance Laplacian of the full network, buses in case order.
Eigen::MatrixXd network_laplacian(const GridCase& grid);

// Schur complement of the Laplacian onto the unit buses (in unit order).
Eigen::MatrixXd kron_reduce(const GridCase& grid);

LinearModel linearize(const GridCase& grid, const AllocationState& alloc);

// Rebuilds the model with unit j's gains shifted by (dm, dd).
LinearModel perturb_gain(const LinearModel& model, int unit, double dm, double dd);

}  // namespace vsmalloc
