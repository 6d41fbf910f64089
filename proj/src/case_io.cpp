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

#include "vsmalloc/case_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "vsmalloc/freq_metrics.hpp"
#include "vsmalloc/modal_analysis.hpp"

namespace vsmalloc {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, recording missing/ill-typed/unknown keys
// instead of stopping at the first problem.
class ObjectReader {
 public:
    ObjectReader(const json& node, std::string path, std::vector<std::string>& errors)
        : node_(node), path_(std::move(path)), errors_(errors) {
        if (!node_.is_object()) errors_.push_back(path_ + ": expected an object");
    }

    bool ok() const { return node_.is_object(); }
    bool has(const std::string& key) const { return ok() && node_.contains(key); }
    const std::string& path() const { return path_; }

    const json* child(const std::string& key, bool required) {
        seen_.insert(key);
        if (!ok()) return nullptr;
        auto it = node_.find(key);
        if (it == node_.end()) {
            if (required) errors_.push_back(path_ + "." + key + ": required key is missing");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            errors_.push_back(path_ + "." + key + ": expected a number");
            return std::nullopt;
        }
        return v->get<double>();
    }

    std::optional<int> integer(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            errors_.push_back(path_ + "." + key + ": expected an integer");
            return std::nullopt;
        }
        return v->get<int>();
    }

    std::optional<std::string> text(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            errors_.push_back(path_ + "." + key + ": expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<bool> boolean(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            errors_.push_back(path_ + "." + key + ": expected true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::pair<double, double>> range(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
            errors_.push_back(path_ + "." + key + ": expected [low, high]");
            return std::nullopt;
        }
        return std::make_pair((*v)[0].get<double>(), (*v)[1].get<double>());
    }

    // Reports keys that were never asked for.
    void finish() {
        if (!ok()) return;
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.contains(it.key())) errors_.push_back(path_ + "." + it.key() + ": unknown key");
        }
    }

 private:
    const json& node_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
void optional_value(std::optional<T> value, T& target, const std::string& name, std::vector<std::string>& defaults) {
    if (value) {
        target = *value;
    } else {
        std::ostringstream out;
        out << name << " = " << std::boolalpha << target;
        defaults.push_back(out.str());
    }
}

GenUnit read_unit(const json& node, const std::string& path, std::vector<std::string>& errors) {
    ObjectReader r(node, path, errors);
    GenUnit u;
    if (auto v = r.integer("bus", true)) u.bus = *v;
    if (auto v = r.text("kind", true)) {
        try {
            u.kind = unit_kind_from_string(*v);
        } catch (const InputError& e) {
            errors.push_back(path + ".kind: " + e.what());
        }
    }
    if (auto v = r.number("p_g", true)) u.p_g = *v;
    if (auto v = r.number("m0", true)) u.m = *v;
    if (auto v = r.number("d0", true)) u.d = *v;
    if (auto v = r.number("d_fixed", false)) u.d_fixed = *v;
    if (const json* g = r.child("governor", false)) {
        ObjectReader gr(*g, path + ".governor", errors);
        Governor gov;
        if (auto v = gr.number("T", true)) gov.T = *v;
        if (auto v = gr.number("r_inv", true)) gov.r_inv = *v;
        if (auto v = gr.number("f_frac", true)) gov.f_frac = *v;
        gr.finish();
        u.governor = gov;
    }
    if (const json* b = r.child("bounds", false)) {
        ObjectReader br(*b, path + ".bounds", errors);
        GainBounds gb;
        if (auto v = br.range("m", true)) std::tie(gb.m_lo, gb.m_hi) = *v;
        if (auto v = br.range("d", true)) std::tie(gb.d_lo, gb.d_hi) = *v;
        br.finish();
        u.bounds = gb;
    }
    r.finish();
    return u;
}

json unit_to_json(const GenUnit& u) {
    json j;
    j["bus"] = u.bus;
    j["kind"] = to_string(u.kind);
    j["p_g"] = u.p_g;
    j["m0"] = u.m;
    j["d0"] = u.d;
    j["d_fixed"] = u.d_fixed;
    if (u.governor) j["governor"] = {{"T", u.governor->T}, {"r_inv", u.governor->r_inv}, {"f_frac", u.governor->f_frac}};
    if (u.bounds) {
        j["bounds"] = {{"m", {u.bounds->m_lo, u.bounds->m_hi}}, {"d", {u.bounds->d_lo, u.bounds->d_hi}}};
    }
    return j;
}

const char* phi_name(PhiMode mode) {
    switch (mode) {
        case PhiMode::kSigned:
            return "signed";
        case PhiMode::kMagnitude:
            return "magnitude";
        case PhiMode::kOff:
            return "off";
    }
    return "?";
}

}  // namespace

CaseFile parse_case(const std::string& text, const std::optional<std::string>& variant) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("case file is not valid JSON: ") + e.what());
    }

    std::vector<std::string> errors;
    CaseFile file;
    ObjectReader top(root, "$", errors);
    if (!top.ok()) throw InputError(std::move(errors));

    if (auto v = top.integer("schema", true); v && *v != 1)
        errors.push_back("$.schema: unsupported schema version " + std::to_string(*v) + " (expected 1)");
    if (auto v = top.text("name", false)) file.grid.name = *v;
    if (auto v = top.number("base_power_mva", true)) file.grid.base_power = *v;
    if (auto v = top.number("f0_hz", true)) file.grid.f0 = *v;

    if (const json* net = top.child("network", true)) {
        ObjectReader nr(*net, "$.network", errors);
        if (const json* buses = nr.child("buses", true)) {
            if (!buses->is_array()) {
                errors.push_back("$.network.buses: expected an array of integers");
            } else {
                for (std::size_t k = 0; k < buses->size(); ++k) {
                    if ((*buses)[k].is_number_integer()) {
                        file.grid.buses.push_back((*buses)[k].get<int>());
                    } else {
                        errors.push_back("$.network.buses[" + std::to_string(k) + "]: expected an integer");
                    }
                }
            }
        }
        if (const json* lines = nr.child("lines", true)) {
            if (!lines->is_array()) {
                errors.push_back("$.network.lines: expected an array");
            } else {
                for (std::size_t k = 0; k < lines->size(); ++k) {
                    ObjectReader lr((*lines)[k], "$.network.lines[" + std::to_string(k) + "]", errors);
                    Line line;
                    if (auto v = lr.integer("from", true)) line.from = *v;
                    if (auto v = lr.integer("to", true)) line.to = *v;
                    if (auto v = lr.number("b", true)) line.b = *v;
                    lr.finish();
                    file.grid.lines.push_back(line);
                }
            }
        }
        nr.finish();
    }

    if (const json* units = top.child("units", true)) {
        if (!units->is_array()) {
            errors.push_back("$.units: expected an array");
        } else {
            for (std::size_t k = 0; k < units->size(); ++k)
                file.grid.units.push_back(read_unit((*units)[k], "$.units[" + std::to_string(k) + "]", errors));
        }
    }

    std::string chosen = "base";
    if (const json* sc = top.child("scenario", true)) {
        ObjectReader sr(*sc, "$.scenario", errors);
        if (auto v = sr.integer("disturbance_bus", true)) file.grid.disturbance_bus = *v;
        if (auto v = sr.number("dP", false)) file.loop.dP = *v;
        if (auto v = sr.text("variant", false)) chosen = *v;
        sr.finish();
    }
    if (variant) chosen = *variant;
    file.variant = chosen;

    const json* variants = top.child("variants", false);
    if (variants) {
        if (!variants->is_object()) {
            errors.push_back("$.variants: expected an object");
        } else if (!variants->contains(chosen)) {
            errors.push_back("variant '" + chosen + "' is not defined under $.variants");
        } else {
            const std::string path = "$.variants." + chosen;
            ObjectReader vr((*variants)[chosen], path, errors);
            if (const json* overrides = vr.child("units", true)) {
                if (!overrides->is_array()) {
                    errors.push_back(path + ".units: expected an array");
                } else {
                    for (std::size_t k = 0; k < overrides->size(); ++k) {
                        const std::string upath = path + ".units[" + std::to_string(k) + "]";
                        GenUnit u = read_unit((*overrides)[k], upath, errors);
                        bool replaced = false;
                        for (auto& base : file.grid.units) {
                            if (base.bus == u.bus) {
                                base = u;
                                replaced = true;
                            }
                        }
                        if (!replaced) errors.push_back(upath + ": no base unit on bus " + std::to_string(u.bus));
                    }
                }
            }
            vr.finish();
        }
        // Other variants are parsed for syntax only.
        if (variants->is_object()) {
            for (auto it = variants->begin(); it != variants->end(); ++it) {
                if (it.key() == chosen) continue;
                std::vector<std::string> ignored;
                ObjectReader other(it.value(), "$.variants." + it.key(), errors);
                other.child("units", true);
                other.finish();
            }
        }
    } else if (chosen != "base") {
        errors.push_back("variant '" + chosen + "' requested but the case defines no variants");
    }

    auto& defaults = file.defaults_applied;
    if (const json* lim = top.child("limits", false)) {
        ObjectReader lr(*lim, "$.limits", errors);
        optional_value(lr.number("zeta_floor", false), file.loop.zeta_floor, "limits.zeta_floor", defaults);
        optional_value(lr.number("rocof_hz_s", false), file.loop.rocof_limit, "limits.rocof_hz_s", defaults);
        optional_value(lr.number("nadir_hz", false), file.loop.nadir_limit, "limits.nadir_hz", defaults);
        lr.finish();
    } else {
        defaults.push_back("limits = built-in thresholds (zeta 0.1, RoCoF 1 Hz/s, nadir 0.8 Hz)");
    }

    if (const json* loop = top.child("loop", false)) {
        ObjectReader lr(*loop, "$.loop", errors);
        auto& c = file.loop;
        optional_value(lr.integer("max_iterations", false), c.max_iterations, "loop.max_iterations", defaults);
        optional_value(lr.number("mismatch_threshold", false), c.mismatch_threshold, "loop.mismatch_threshold", defaults);
        optional_value(lr.number("min_step_scale", false), c.min_step_scale, "loop.min_step_scale", defaults);
        optional_value(lr.number("convergence_eps", false), c.convergence_eps, "loop.convergence_eps", defaults);
        optional_value(lr.integer("convergence_window", false), c.convergence_window, "loop.convergence_window", defaults);
        if (const json* sb = lr.child("step_bounds", false)) {
            ObjectReader br(*sb, "$.loop.step_bounds", errors);
            if (auto v = br.range("dm", true)) std::tie(c.step_dm_lo, c.step_dm_hi) = *v;
            if (auto v = br.range("dd", true)) std::tie(c.step_dd_lo, c.step_dd_hi) = *v;
            br.finish();
        } else {
            defaults.push_back("loop.step_bounds = dm [-0.5, 0.5], dd [-0.5, 0.5]");
        }
        if (auto v = lr.text("phi", false)) {
            if (*v == "signed") {
                c.phi_mode = PhiMode::kSigned;
            } else if (*v == "magnitude") {
                c.phi_mode = PhiMode::kMagnitude;
            } else if (*v == "off") {
                c.phi_mode = PhiMode::kOff;
            } else {
                errors.push_back("$.loop.phi: expected signed, magnitude or off");
            }
        } else {
            defaults.push_back("loop.phi = signed");
        }
        optional_value(lr.boolean("move_limit_adaptation", false), c.move_limit_adaptation,
                       "loop.move_limit_adaptation", defaults);
        optional_value(lr.number("min_move_scale", false), c.min_move_scale, "loop.min_move_scale", defaults);
        optional_value(lr.boolean("freq_constraints", false), c.freq_constraints, "loop.freq_constraints", defaults);
        if (auto v = lr.text("rocof_form", false)) {
            if (*v == "exact") {
                c.rocof_form = RocofRowForm::kExact;
            } else if (*v == "taylor") {
                c.rocof_form = RocofRowForm::kTaylor;
            } else {
                errors.push_back("$.loop.rocof_form: expected exact or taylor");
            }
        } else {
            defaults.push_back("loop.rocof_form = exact");
        }
        optional_value(lr.number("filter_tol", false), c.filter_tol, "loop.filter_tol", defaults);
        optional_value(lr.number("slack_tol", false), c.slack_tol, "loop.slack_tol", defaults);
        optional_value(lr.number("guard_tol", false), c.guard_tol, "loop.guard_tol", defaults);
        optional_value(lr.number("progress_margin", false), c.progress_margin, "loop.progress_margin", defaults);
        optional_value(lr.number("zeta_backoff", false), c.zeta_backoff, "loop.zeta_backoff", defaults);
        optional_value(lr.integer("max_cuts", false), c.max_cuts, "loop.max_cuts", defaults);
        lr.finish();
    } else {
        defaults.push_back("loop = built-in defaults");
    }

    if (const json* costs = top.child("costs", false)) {
        ObjectReader cr(*costs, "$.costs", errors);
        auto& c = file.costs;
        optional_value(cr.number("c_zeta", false), c.c_zeta, "costs.c_zeta", defaults);
        optional_value(cr.number("c_f", false), c.c_f, "costs.c_f", defaults);
        optional_value(cr.number("c_fdot", false), c.c_fdot, "costs.c_fdot", defaults);
        optional_value(cr.number("c_M", false), c.c_M, "costs.c_M", defaults);
        optional_value(cr.number("c_D", false), c.c_D, "costs.c_D", defaults);
        cr.finish();
    } else {
        defaults.push_back("costs = c_zeta 100, c_f 10, c_fdot 10, c_M 1, c_D 1");
    }
    top.finish();

    if (errors.empty()) {
        for (auto* check : {+[](const CaseFile& f) { validate(f.grid); }, +[](const CaseFile& f) { f.loop.validate(); },
                            +[](const CaseFile& f) { f.costs.validate(); }}) {
            try {
                check(file);
            } catch (const InputError& e) {
                errors.insert(errors.end(), e.violations().begin(), e.violations().end());
            }
        }
    }
    if (!errors.empty()) throw InputError(std::move(errors));
    return file;
}

CaseFile load_case(const std::filesystem::path& path, const std::optional<std::string>& variant) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open case file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str(), variant);
}

std::string serialize_case(const CaseFile& file) {
    const auto& g = file.grid;
    const auto& c = file.loop;
    json root;
    root["schema"] = 1;
    root["name"] = g.name;
    root["base_power_mva"] = g.base_power;
    root["f0_hz"] = g.f0;
    json lines = json::array();
    for (const auto& l : g.lines) lines.push_back({{"from", l.from}, {"to", l.to}, {"b", l.b}});
    root["network"] = {{"buses", g.buses}, {"lines", lines}};
    json units = json::array();
    for (const auto& u : g.units) units.push_back(unit_to_json(u));
    root["units"] = units;
    json scenario = {{"disturbance_bus", g.disturbance_bus}};
    if (c.dP) scenario["dP"] = *c.dP;
    root["scenario"] = scenario;
    root["limits"] = {{"zeta_floor", c.zeta_floor}, {"rocof_hz_s", c.rocof_limit}, {"nadir_hz", c.nadir_limit}};
    root["loop"] = {{"max_iterations", c.max_iterations},
                    {"mismatch_threshold", c.mismatch_threshold},
                    {"min_step_scale", c.min_step_scale},
                    {"convergence_eps", c.convergence_eps},
                    {"convergence_window", c.convergence_window},
                    {"step_bounds", {{"dm", {c.step_dm_lo, c.step_dm_hi}}, {"dd", {c.step_dd_lo, c.step_dd_hi}}}},
                    {"phi", phi_name(c.phi_mode)},
                    {"move_limit_adaptation", c.move_limit_adaptation},
                    {"min_move_scale", c.min_move_scale},
                    {"freq_constraints", c.freq_constraints},
                    {"rocof_form", c.rocof_form == RocofRowForm::kExact ? "exact" : "taylor"},
                    {"filter_tol", c.filter_tol},
                    {"slack_tol", c.slack_tol},
                    {"guard_tol", c.guard_tol},
                    {"progress_margin", c.progress_margin},
                    {"zeta_backoff", c.zeta_backoff},
                    {"max_cuts", c.max_cuts}};
    const auto& k = file.costs;
    root["costs"] = {{"c_zeta", k.c_zeta}, {"c_f", k.c_f}, {"c_fdot", k.c_fdot}, {"c_M", k.c_M}, {"c_D", k.c_D}};
    return root.dump(2) + "\n";
}

MetricTable compute_metrics(const GridCase& grid, const AllocationState& alloc, const LoopConfig& loop) {
    MetricTable t;
    const LinearModel model = linearize(grid, alloc);
    const ModeSet modes = decompose(model, {.sensitivities = false});
    const WorstModes worst = worst_modes(modes, loop.filter_tol);
    t.zeta_min = worst.zeta_min;
    t.sigma_max = worst.sigma_max;
    const double dP = loop.dP.value_or(default_disturbance(grid));
    const AggregateParams agg = aggregate(grid, alloc, dP);
    t.M = agg.M;
    t.D = agg.D;
    for (std::size_t j = 0; j < grid.units.size(); ++j) {
        if (!is_controllable(grid.units[j])) continue;
        t.inertia_MWs2 += alloc.m[j] * grid.units[j].p_g;
        t.damping_MWs += alloc.d[j] * grid.units[j].p_g;
    }
    t.rocof_hz_s = rocof(agg);
    const NadirEstimate n = nadir_estimate(agg);
    t.nadir_hz = n.nadir;
    t.nadir_regime = n.regime == NadirRegime::kOscillatory ? "oscillatory" : "steady-state";
    const NormReport norm = norms(model);
    t.stable = norm.stable;
    t.h2 = norm.h2;
    t.hinf = norm.hinf;
    return t;
}

std::string metrics_to_json(const MetricTable& m) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["inertia_MWs2"] = m.inertia_MWs2;
    j["damping_MWs"] = m.damping_MWs;
    j["M_s"] = m.M;
    j["D_pu"] = m.D;
    j["zeta_min"] = m.zeta_min;
    j["sigma_max"] = m.sigma_max;
    j["rocof_hz_s"] = m.rocof_hz_s;
    j["nadir_hz"] = m.nadir_hz;
    j["nadir_regime"] = m.nadir_regime;
    j["stable"] = m.stable;
    j["h2"] = finite_or_null(m.h2);
    j["hinf"] = finite_or_null(m.hinf);
    return j.dump(2) + "\n";
}

ResultBundle make_bundle(const GridCase& grid, const LoopConfig& loop, IterationTrace trace) {
    ResultBundle b;
    b.grid = grid;
    b.alloc = trace.final_alloc;
    b.metrics = compute_metrics(grid, b.alloc, loop);
    b.trace = std::move(trace);
    return b;
}

void write_allocation_csv(std::ostream& out, const GridCase& grid, const AllocationState& alloc) {
    out << "unit,bus,kind,m,d\n";
    for (std::size_t j = 0; j < grid.units.size(); ++j) {
        out << j << "," << grid.units[j].bus << "," << to_string(grid.units[j].kind) << "," << fmt(alloc.m[j]) << ","
            << fmt(alloc.d[j]) << "\n";
    }
}

AllocationState read_allocation_csv(const std::filesystem::path& path, const GridCase& grid) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open allocation file '" + path.string() + "'");
    AllocationState alloc = AllocationState::from_case(grid);
    std::string line;
    std::getline(in, line);
    if (line != "unit,bus,kind,m,d") throw InputError("allocation file has an unexpected header");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string unit, bus, kind, m, d;
        if (!std::getline(ss, unit, ',') || !std::getline(ss, bus, ',') || !std::getline(ss, kind, ',') ||
            !std::getline(ss, m, ',') || !std::getline(ss, d, ','))
            throw InputError("allocation file row is malformed: " + line);
        const auto j = static_cast<std::size_t>(std::stoul(unit));
        if (j >= grid.units.size()) throw InputError("allocation file names unknown unit " + unit);
        alloc.m[j] = std::stod(m);
        alloc.d[j] = std::stod(d);
        ++rows;
    }
    if (rows != grid.units.size()) throw InputError("allocation file does not cover every unit");
    return alloc;
}

void write_trace_header(std::ostream& out, const GridCase& grid, const std::vector<int>& controllable) {
    out << "iteration,phase,zeta_min,sigma_max,rocof_hz_s,nadir_hz,M,D,effort,halvings,step_scale,max_mismatch,"
           "eta_zeta,eta_f1,eta_f2,eta_fdot1,eta_fdot2";
    for (const char* prefix : {"m_bus", "d_bus", "dzeta_dm_bus", "dzeta_dd_bus"}) {
        for (int j : controllable) out << "," << prefix << grid.units[static_cast<std::size_t>(j)].bus;
    }
    out << "\n";
}

void write_trace_row(std::ostream& out, const TraceRow& row, const std::vector<int>& controllable) {
    out << row.iteration << "," << to_string(row.phase) << "," << fmt(row.zeta_min) << "," << fmt(row.sigma_max) << ","
        << fmt(row.rocof) << "," << fmt(row.nadir) << "," << fmt(row.M) << "," << fmt(row.D) << "," << fmt(row.effort)
        << "," << row.halvings << "," << fmt(row.step_scale) << "," << fmt(row.max_mismatch);
    for (std::size_t k = 0; k < 5; ++k) out << "," << fmt(k < row.slacks.size() ? row.slacks[k] : 0.0);
    for (int j : controllable) out << "," << fmt(row.m[static_cast<std::size_t>(j)]);
    for (int j : controllable) out << "," << fmt(row.d[static_cast<std::size_t>(j)]);
    for (double v : row.dzeta_min_dm) out << "," << fmt(v);
    for (double v : row.dzeta_min_dd) out << "," << fmt(v);
    out << "\n";
}

void write_trace_csv(std::ostream& out, const GridCase& grid, const IterationTrace& trace) {
    write_trace_header(out, grid, trace.controllable);
    for (const auto& row : trace.rows) write_trace_row(out, row, trace.controllable);
}

void write_spectrum_csv(std::ostream& out, const Eigen::VectorXcd& lambdas) {
    out << "re,im,zeta\n";
    for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
        out << fmt(lambdas(i).real()) << "," << fmt(lambdas(i).imag()) << "," << fmt(damping_ratio(lambdas(i))) << "\n";
    }
}

void CsvTraceSink::on_row(const IterationTrace& trace, const TraceRow& row) {
    if (!header_written_) {
        write_trace_header(out_, grid_, trace.controllable);
        header_written_ = true;
    }
    write_trace_row(out_, row, trace.controllable);
    out_.flush();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

}  // namespace

void export_bundle(const ResultBundle& bundle, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");

    std::ostringstream alloc;
    write_allocation_csv(alloc, bundle.grid, bundle.alloc);
    write_file(dir / "allocation.csv", alloc.str());
    write_file(dir / "metrics.json", metrics_to_json(bundle.metrics));

    std::ostringstream trace;
    write_trace_csv(trace, bundle.grid, bundle.trace);
    write_file(dir / "trace.csv", trace.str());

    std::ostringstream modes;
    modes << "iteration,mode,predicted_zeta,actual_zeta\n";
    for (const auto& row : bundle.trace.rows) {
        for (std::size_t r = 0; r < row.predicted_zeta.size(); ++r) {
            modes << row.iteration << "," << r << "," << fmt(row.predicted_zeta[r]) << "," << fmt(row.actual_zeta[r])
                  << "\n";
        }
    }
    write_file(dir / "trace_modes.csv", modes.str());

    for (const auto& snap : bundle.trace.spectra) {
        std::ostringstream spec;
        write_spectrum_csv(spec, snap.lambdas);
        write_file(dir / ("spectrum_" + snap.tag + ".csv"), spec.str());
    }
}

}  // namespace vsmalloc
