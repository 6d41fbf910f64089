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

// Command-line front end: optimize, analyze, norms, simulate, trace-export.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "vsmalloc/allocator.hpp"
#include "vsmalloc/case_io.hpp"
#include "vsmalloc/error.hpp"
#include "vsmalloc/lp_kernel.hpp"
#include "vsmalloc/modal_analysis.hpp"
#include "vsmalloc/system_norms.hpp"
#include "vsmalloc/time_sim.hpp"

namespace {

using namespace vsmalloc;

constexpr int kExitOk = 0;
constexpr int kExitStall = 2;
constexpr int kExitInput = 3;

struct CommonArgs {
    std::string case_path;
    std::string variant;
};

struct RunArgs {
    std::string method = "multistep";
    bool no_freq = false;
    double step_scale = 1.0;
    int max_iterations = 0;
    std::string dump_lp_dir;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

CaseFile load(const CommonArgs& args) {
    std::optional<std::string> variant;
    if (!args.variant.empty()) variant = args.variant;
    CaseFile file = load_case(args.case_path, variant);
    for (const auto& d : file.defaults_applied) std::cerr << "default: " << d << "\n";
    return file;
}

void apply_run_args(CaseFile& file, const RunArgs& run) {
    if (run.no_freq) file.loop.freq_constraints = false;
    if (run.max_iterations > 0) file.loop.max_iterations = run.max_iterations;
    if (run.step_scale != 1.0) {
        file.loop.step_dm_lo *= run.step_scale;
        file.loop.step_dm_hi *= run.step_scale;
        file.loop.step_dd_lo *= run.step_scale;
        file.loop.step_dd_hi *= run.step_scale;
    }
    file.loop.validate();
}

IterationTrace run_allocator(const CaseFile& file, const RunArgs& run, TraceSink* sink) {
    Allocator allocator(SwingModelProvider::create(file.grid), file.loop, file.costs);
    if (!run.dump_lp_dir.empty()) {
        std::filesystem::create_directories(run.dump_lp_dir);
        const std::filesystem::path dir = run.dump_lp_dir;
        allocator.set_lp_observer([dir](int iteration, Phase phase, const LinearProgram& lp) {
            char name[64];
            std::snprintf(name, sizeof name, "lp_%04d_%s.txt", iteration, to_string(phase));
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) throw IoError("cannot write LP dump into '" + dir.string() + "'");
            out << dump_lp(lp);
        });
    }
    const AllocationState alloc0 = AllocationState::from_case(file.grid);
    if (run.method == "uniform") return allocator.run_uniform(alloc0, sink);
    return allocator.run_multistep(alloc0, sink);
}

int report_status(const IterationTrace& trace) {
    std::cerr << "status: " << to_string(trace.status) << " after " << trace.rows.size() - 1
              << " iterations (final phase " << to_string(trace.final_phase) << ")\n";
    if (trace.status == LoopStatus::kConverged) return kExitOk;
    if (!trace.diagnosis.empty()) std::cerr << "diagnosis: " << trace.diagnosis << "\n";
    return kExitStall;
}

int cmd_optimize(const CommonArgs& common, const RunArgs& run, const std::string& out_dir) {
    CaseFile file = load(common);
    apply_run_args(file, run);
    IterationTrace trace = run_allocator(file, run, nullptr);
    const int code = report_status(trace);
    const ResultBundle bundle = make_bundle(file.grid, file.loop, std::move(trace));
    export_bundle(bundle, out_dir);
    std::cout << metrics_to_json(bundle.metrics);
    return code;
}

int cmd_trace_export(const CommonArgs& common, const RunArgs& run, const std::string& out_path) {
    CaseFile file = load(common);
    apply_run_args(file, run);
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file_out.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file_out) throw IoError("cannot write '" + out_path + "'");
        out = &file_out;
    }
    CsvTraceSink sink(*out, file.grid);
    const IterationTrace trace = run_allocator(file, run, &sink);
    return report_status(trace);
}

int cmd_analyze(const CommonArgs& common, const std::string& alloc_path) {
    const CaseFile file = load(common);
    AllocationState alloc = AllocationState::from_case(file.grid);
    if (!alloc_path.empty()) alloc = read_allocation_csv(alloc_path, file.grid);
    const LinearModel model = linearize(file.grid, alloc);
    const ModeSet modes = decompose(model, {.sensitivities = false});
    std::cout << "# spectrum\n";
    write_spectrum_csv(std::cout, modes.lambdas);
    const MetricTable metrics = compute_metrics(file.grid, alloc, file.loop);
    std::cout << "# metrics\n" << metrics_to_json(metrics);
    std::cout << "# limits\n";
    std::cout << "zeta_min " << (metrics.zeta_min >= file.loop.zeta_floor ? "ok" : "below floor") << "\n";
    std::cout << "rocof " << (std::abs(metrics.rocof_hz_s) <= file.loop.rocof_limit ? "ok" : "above limit") << "\n";
    std::cout << "nadir " << (std::abs(metrics.nadir_hz) <= file.loop.nadir_limit ? "ok" : "above limit") << "\n";
    return kExitOk;
}

int cmd_norms(const CommonArgs& common, const std::string& alloc_path) {
    const CaseFile file = load(common);
    AllocationState alloc = AllocationState::from_case(file.grid);
    if (!alloc_path.empty()) alloc = read_allocation_csv(alloc_path, file.grid);
    const LinearModel model = linearize(file.grid, alloc);
    const NormReport r = norms(model);
    std::cout << "stable " << (r.stable ? "true" : "false") << "\n";
    std::cout << "h2 " << num(r.h2) << "\n";
    std::cout << "hinf " << num(r.hinf) << "\n";
    std::cout << "hinf_bracket " << num(r.hinf_lo) << " " << num(r.hinf_hi) << "\n";
    return kExitOk;
}

int cmd_simulate(const CommonArgs& common, const std::string& alloc_path, std::optional<double> dP, double horizon,
                 double dt, const std::string& out_path) {
    const CaseFile file = load(common);
    AllocationState alloc = AllocationState::from_case(file.grid);
    if (!alloc_path.empty()) alloc = read_allocation_csv(alloc_path, file.grid);
    const LinearModel model = linearize(file.grid, alloc);
    const double disturbance = dP.value_or(file.loop.dP.value_or(default_disturbance(file.grid)));
    const Trajectory traj = step_response(model, disturbance, horizon, dt);
    std::vector<std::string> labels;
    for (const auto& u : file.grid.units) labels.push_back("w_bus" + std::to_string(u.bus));
    if (out_path.empty()) {
        write_trajectory_csv(std::cout, traj, labels);
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + out_path + "'");
        write_trajectory_csv(out, traj, labels);
    }
    return kExitOk;
}

void add_common(CLI::App* sub, CommonArgs& common) {
    sub->add_option("--case", common.case_path, "case file (JSON, schema 1)")->required();
    sub->add_option("--variant", common.variant, "case variant overriding the scenario's choice");
}

void add_run(CLI::App* sub, RunArgs& run) {
    sub->add_option("--method", run.method, "allocation method")->check(CLI::IsMember({"uniform", "multistep"}));
    sub->add_flag("--no-freq-constraints", run.no_freq, "drop the RoCoF and nadir constraints");
    sub->add_option("--step-scale", run.step_scale, "multiply the per-iteration step bounds")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-iterations", run.max_iterations, "override the iteration cap")
        ->check(CLI::PositiveNumber);
    sub->add_option("--dump-lp", run.dump_lp_dir, "write every LP to this directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inertia and damping gain allocation for converter-rich grids"};
    app.require_subcommand(1);

    CommonArgs common;
    RunArgs run;
    std::string out_dir, out_path, alloc_path;
    std::optional<double> dP;
    double horizon = 30.0, dt = 1e-3;

    auto* optimize = app.add_subcommand("optimize", "run the allocator and write a result bundle");
    add_common(optimize, common);
    add_run(optimize, run);
    optimize->add_option("--out", out_dir, "output directory")->required();

    auto* trace_export = app.add_subcommand("trace-export", "run the allocator and stream the trace as CSV");
    add_common(trace_export, common);
    add_run(trace_export, run);
    trace_export->add_option("--out", out_path, "output file (default: standard output)");

    auto* analyze = app.add_subcommand("analyze", "spectrum and metrics of an allocation");
    add_common(analyze, common);
    analyze->add_option("--allocation", alloc_path, "allocation.csv to analyze instead of the case gains");

    auto* norm_cmd = app.add_subcommand("norms", "H2 and Hinf norms of an allocation");
    add_common(norm_cmd, common);
    norm_cmd->add_option("--allocation", alloc_path, "allocation.csv to analyze instead of the case gains");

    auto* simulate = app.add_subcommand("simulate", "step response to a power imbalance");
    add_common(simulate, common);
    simulate->add_option("--allocation", alloc_path, "allocation.csv to simulate instead of the case gains");
    simulate->add_option("--dP", dP, "disturbance in system per unit");
    simulate->add_option("--horizon", horizon, "simulated time in seconds")->check(CLI::PositiveNumber);
    simulate->add_option("--dt", dt, "RK4 step in seconds")->check(CLI::PositiveNumber);
    simulate->add_option("--out", out_path, "output file (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*optimize) return cmd_optimize(common, run, out_dir);
        if (*trace_export) return cmd_trace_export(common, run, out_path);
        if (*analyze) return cmd_analyze(common, alloc_path);
        if (*norm_cmd) return cmd_norms(common, alloc_path);
        if (*simulate) return cmd_simulate(common, alloc_path, dP, horizon, dt, out_path);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStall;
    }
    return kExitInput;
}
