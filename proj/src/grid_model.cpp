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

#include "vsmalloc/grid_model.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include "vsmalloc/error.hpp"

namespace vsmalloc {

namespace {

std::string unit_tag(std::size_t j, const GenUnit& unit) {
    std::ostringstream out;
    out << "unit " << j << " (bus " << unit.bus << ")";
    return out.str();
}

std::string num(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

std::map<int, int> bus_index(const GridCase& grid) {
    std::map<int, int> index;
    for (std::size_t i = 0; i < grid.buses.size(); ++i) index.emplace(grid.buses[i], static_cast<int>(i));
    return index;
}

bool connected(const GridCase& grid, const std::map<int, int>& index) {
    const std::size_t n = grid.buses.size();
    if (n == 0) return false;
    std::vector<std::vector<int>> adj(n);
    for (const auto& line : grid.lines) {
        auto a = index.find(line.from);
        auto b = index.find(line.to);
        if (a == index.end() || b == index.end()) continue;
        adj[a->second].push_back(b->second);
        adj[b->second].push_back(a->second);
    }
    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
        int at = frontier.front();
        frontier.pop();
        for (int next : adj[at]) {
            if (!seen[next]) {
                seen[next] = true;
                ++count;
                frontier.push(next);
            }
        }
    }
    return count == n;
}

}  // namespace

std::string to_string(UnitKind kind) {
    switch (kind) {
        case UnitKind::kSynchronous:
            return "SG";
        case UnitKind::kGridForming:
            return "GFM";
        case UnitKind::kGridFollowing:
            return "GFL";
    }
    return "?";
}

UnitKind unit_kind_from_string(const std::string& text) {
    if (text == "SG") return UnitKind::kSynchronous;
    if (text == "GFM") return UnitKind::kGridForming;
    if (text == "GFL") return UnitKind::kGridFollowing;
    throw InputError("unknown unit kind '" + text + "' (expected SG, GFM or GFL)");
}

void validate(const GridCase& grid) {
    std::vector<std::string> errors;
    if (!(grid.base_power > 0.0)) errors.push_back("base_power must be > 0 (got " + num(grid.base_power) + ")");
    if (!(grid.f0 > 0.0)) errors.push_back("f0 must be > 0 (got " + num(grid.f0) + ")");
    if (grid.buses.empty()) errors.push_back("network has no buses");
    if (grid.units.empty()) errors.push_back("case has no generating units");

    const auto index = bus_index(grid);
    if (index.size() != grid.buses.size()) errors.push_back("bus ids are not unique");

    for (std::size_t k = 0; k < grid.lines.size(); ++k) {
        const auto& line = grid.lines[k];
        const std::string tag = "line " + std::to_string(k) + " (" + std::to_string(line.from) + "-" +
                                std::to_string(line.to) + ")";
        if (!index.contains(line.from) || !index.contains(line.to)) errors.push_back(tag + ": unknown bus");
        if (line.from == line.to) errors.push_back(tag + ": connects a bus to itself");
        if (!(line.b > 0.0)) errors.push_back(tag + ": susceptance b must be > 0 (got " + num(line.b) + ")");
    }
    if (!grid.buses.empty() && !connected(grid, index)) errors.push_back("network is not connected");

    std::set<int> unit_buses;
    for (std::size_t j = 0; j < grid.units.size(); ++j) {
        const auto& u = grid.units[j];
        const std::string tag = unit_tag(j, u);
        if (!index.contains(u.bus)) errors.push_back(tag + ": bus does not exist");
        if (!unit_buses.insert(u.bus).second) errors.push_back(tag + ": another unit already sits on this bus");
        if (!(u.m > 0.0)) errors.push_back(tag + ": m must be > 0 (got " + num(u.m) + ")");
        if (!(u.d >= 0.0)) errors.push_back(tag + ": d must be >= 0 (got " + num(u.d) + ")");
        if (!(u.p_g >= 0.0)) errors.push_back(tag + ": p_g must be >= 0 (got " + num(u.p_g) + ")");
        if (!std::isfinite(u.d_fixed)) errors.push_back(tag + ": d_fixed must be finite");
        if (u.kind == UnitKind::kSynchronous) {
            if (!u.governor) {
                errors.push_back(tag + ": synchronous machine needs governor parameters");
            } else {
                const auto& g = *u.governor;
                if (!(g.T > 0.0)) errors.push_back(tag + ": governor T must be > 0 (got " + num(g.T) + ")");
                if (!(g.r_inv >= 0.0))
                    errors.push_back(tag + ": governor r_inv must be >= 0 (got " + num(g.r_inv) + ")");
                if (!(g.f_frac >= 0.0 && g.f_frac <= 1.0))
                    errors.push_back(tag + ": governor f_frac must lie in [0, 1] (got " + num(g.f_frac) + ")");
            }
        } else {
            if (u.governor) errors.push_back(tag + ": converter units carry no governor");
            if (!u.bounds) {
                errors.push_back(tag + ": converter unit needs gain bounds");
            } else {
                const auto& b = *u.bounds;
                if (!(b.m_lo > 0.0)) errors.push_back(tag + ": bounds m_lo must be > 0 (got " + num(b.m_lo) + ")");
                if (!(b.d_lo >= 0.0)) errors.push_back(tag + ": bounds d_lo must be >= 0 (got " + num(b.d_lo) + ")");
                if (!(b.m_lo <= b.m_hi)) errors.push_back(tag + ": bounds m_lo > m_hi");
                if (!(b.d_lo <= b.d_hi)) errors.push_back(tag + ": bounds d_lo > d_hi");
                if (u.m < b.m_lo || u.m > b.m_hi) errors.push_back(tag + ": m outside its bounds");
                if (u.d < b.d_lo || u.d > b.d_hi) errors.push_back(tag + ": d outside its bounds");
            }
        }
    }
    if (!index.contains(grid.disturbance_bus))
        errors.push_back("disturbance bus " + std::to_string(grid.disturbance_bus) + " does not exist");

    if (!errors.empty()) throw InputError(std::move(errors));
}

AllocationState AllocationState::from_case(const GridCase& grid) {
    AllocationState alloc;
    for (const auto& u : grid.units) {
        alloc.m.push_back(u.m);
        alloc.d.push_back(u.d);
        alloc.bounds.push_back(u.bounds.value_or(GainBounds{u.m, u.m, u.d, u.d}));
    }
    return alloc;
}

std::vector<int> controllable_units(const GridCase& grid) {
    std::vector<int> out;
    for (std::size_t j = 0; j < grid.units.size(); ++j) {
        if (is_controllable(grid.units[j])) out.push_back(static_cast<int>(j));
    }
    return out;
}

Eigen::MatrixXd network_laplacian(const GridCase& grid) {
    const auto index = bus_index(grid);
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& line : grid.lines) {
        const int a = index.at(line.from);
        const int b = index.at(line.to);
        lap(a, a) += line.b;
        lap(b, b) += line.b;
        lap(a, b) -= line.b;
        lap(b, a) -= line.b;
    }
    return lap;
}

namespace {

struct Partition {
    std::vector<int> kept;     // bus indices of units, in unit order
    std::vector<int> removed;  // passive bus indices, in case order
};

Partition partition(const GridCase& grid) {
    const auto index = bus_index(grid);
    Partition part;
    std::set<int> kept;
    for (const auto& u : grid.units) {
        part.kept.push_back(index.at(u.bus));
        kept.insert(index.at(u.bus));
    }
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
        if (!kept.contains(static_cast<int>(i))) part.removed.push_back(static_cast<int>(i));
    }
    return part;
}

Eigen::MatrixXd take(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = m(rows[r], cols[c]);
    return out;
}

// Share of a unit power injection at `bus` seen by each unit bus after the
// passive buses are eliminated. Columns sum to one.
Eigen::VectorXd injection_shares(const GridCase& grid, int bus) {
    const auto index = bus_index(grid);
    const auto part = partition(grid);
    Eigen::VectorXd shares = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(part.kept.size()));
    const int at = index.at(bus);
    for (std::size_t j = 0; j < part.kept.size(); ++j) {
        if (part.kept[j] == at) {
            shares(static_cast<Eigen::Index>(j)) = 1.0;
            return shares;
        }
    }
    const Eigen::MatrixXd lap = network_laplacian(grid);
    const Eigen::MatrixXd l_pp = take(lap, part.removed, part.removed);
    const Eigen::MatrixXd l_gp = take(lap, part.kept, part.removed);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(part.removed.size()));
    for (std::size_t p = 0; p < part.removed.size(); ++p)
        if (part.removed[p] == at) unit(static_cast<Eigen::Index>(p)) = 1.0;
    return -l_gp * l_pp.ldlt().solve(unit);
}

}  // namespace

Eigen::MatrixXd kron_reduce(const GridCase& grid) {
    const Eigen::MatrixXd lap = network_laplacian(grid);
    const auto part = partition(grid);
    const Eigen::MatrixXd l_gg = take(lap, part.kept, part.kept);
    if (part.removed.empty()) return l_gg;
    const Eigen::MatrixXd l_pp = take(lap, part.removed, part.removed);
    const Eigen::MatrixXd l_gp = take(lap, part.kept, part.removed);
    Eigen::LLT<Eigen::MatrixXd> chol(l_pp);
    if (chol.info() != Eigen::Success) {
        throw NumericalError("Kron reduction failed: passive-bus Laplacian block is not positive definite");
    }
    Eigen::MatrixXd reduced = l_gg - l_gp * chol.solve(l_gp.transpose());
    // Symmetrize away round-off so downstream row-sum and symmetry checks are clean.
    return 0.5 * (reduced + reduced.transpose());
}

SwingModelProvider::SwingModelProvider(GridCase grid) : grid_(std::move(grid)) {
    validate(grid_);
    laplacian_ = kron_reduce(grid_);
}

std::shared_ptr<const SwingModelProvider> SwingModelProvider::create(GridCase grid) {
    return std::shared_ptr<const SwingModelProvider>(new SwingModelProvider(std::move(grid)));
}

LinearModel SwingModelProvider::linearize(const AllocationState& alloc) const {
    const auto& units = grid_.units;
    const std::size_t count = units.size();
    if (alloc.m.size() != count || alloc.d.size() != count) {
        throw InputError("allocation has " + std::to_string(alloc.m.size()) + " gains for " +
                         std::to_string(count) + " units");
    }
    for (std::size_t j = 0; j < count; ++j) {
        if (!(alloc.m[j] > 0.0)) throw InputError(unit_tag(j, units[j]) + ": m must be > 0 (got " + num(alloc.m[j]) + ")");
        if (!(units[j].p_g > 0.0))
            throw InputError(unit_tag(j, units[j]) + ": p_g must be > 0 to normalize its swing equation");
    }

    LinearModel model;
    model.reference_unit = 0;
    for (std::size_t j = 0; j < count; ++j) {
        if (units[j].kind != UnitKind::kGridFollowing) {
            model.reference_unit = static_cast<int>(j);
            break;
        }
    }
    const int ref = model.reference_unit;

    std::vector<int> angle(count, -1);
    std::vector<int> governor(count, -1);
    model.speed_state.assign(count, -1);
    for (std::size_t j = 0; j < count; ++j) {
        const int unit = static_cast<int>(j);
        if (unit != ref) {
            angle[j] = static_cast<int>(model.state_labels.size());
            model.state_labels.push_back({unit, "angle"});
        }
        model.speed_state[j] = static_cast<int>(model.state_labels.size());
        model.state_labels.push_back({unit, "speed"});
        if (units[j].kind == UnitKind::kSynchronous) {
            governor[j] = static_cast<int>(model.state_labels.size());
            model.state_labels.push_back({unit, "governor"});
        }
    }

    const auto n = static_cast<Eigen::Index>(model.state_labels.size());
    const double omega_base = 2.0 * std::numbers::pi * grid_.f0;
    const Eigen::VectorXd shares = injection_shares(grid_, grid_.disturbance_bus);
    model.A = Eigen::MatrixXd::Zero(n, n);
    model.B = Eigen::MatrixXd::Zero(n, 1);
    model.C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count), n);
    model.D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count), 1);

    for (std::size_t j = 0; j < count; ++j) {
        const auto& u = units[j];
        const double rating = u.p_g / grid_.base_power;
        const double m = alloc.m[j];
        const int w = model.speed_state[j];

        if (angle[j] >= 0) {
            model.A(angle[j], w) += omega_base;
            model.A(angle[j], model.speed_state[ref]) -= omega_base;
        }
        for (std::size_t k = 0; k < count; ++k) {
            if (angle[k] >= 0) model.A(w, angle[k]) -= laplacian_(j, k) / (rating * m);
        }
        model.A(w, w) -= (alloc.d[j] + u.d_fixed) / m;
        if (governor[j] >= 0) {
            const auto& g = *u.governor;
            const int x = governor[j];
            model.A(w, w) -= g.f_frac / m;
            model.A(w, x) += 1.0 / m;
            model.A(x, x) = -1.0 / g.T;
            model.A(x, w) = -(g.r_inv - g.f_frac) / g.T;
        }
        // A positive dP is a loss of generation, so it decelerates the rotor.
        model.B(w, 0) = -shares(static_cast<Eigen::Index>(j)) / (rating * m);
        model.C(static_cast<Eigen::Index>(j), w) = 1.0;
    }

    model.dA_dm.reserve(count);
    model.dA_dd.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        const int w = model.speed_state[j];
        const double m = alloc.m[j];
        Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(n, n);
        dm.row(w) = -model.A.row(w) / m;
        Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(n, n);
        dd(w, w) = -1.0 / m;
        model.dA_dm.push_back(std::move(dm));
        model.dA_dd.push_back(std::move(dd));
    }

    model.provider = std::static_pointer_cast<const ModelProvider>(shared_from_this());
    model.alloc = alloc;
    return model;
}

LinearModel linearize(const GridCase& grid, const AllocationState& alloc) {
    return SwingModelProvider::create(grid)->linearize(alloc);
}

LinearModel perturb_gain(const LinearModel& model, int unit, double dm, double dd) {
    if (!model.provider) throw InputError("model has no provider to re-linearize from");
    if (unit < 0 || static_cast<std::size_t>(unit) >= model.alloc.m.size())
        throw InputError("unit index " + std::to_string(unit) + " out of range");
    AllocationState alloc = model.alloc;
    alloc.m[unit] += dm;
    alloc.d[unit] += dd;
    if (!(alloc.m[unit] > 0.0)) {
        throw InputError("perturbed inertia of unit " + std::to_string(unit) + " is not positive (" +
                         num(alloc.m[unit]) + ")");
    }
    return model.provider->linearize(alloc);
}

}  // namespace vsmalloc
