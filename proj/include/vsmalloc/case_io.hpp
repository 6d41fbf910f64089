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

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vsmalloc/allocator.hpp"
#include "vsmalloc/error.hpp"
#include "vsmalloc/formulation.hpp"
#include "vsmalloc/grid_model.hpp"
#include "vsmalloc/system_norms.hpp"

namespace vsmalloc {

// Failure to read or write a file; reported like any other input problem.
class IoError : public InputError {
 public:
    using InputError::InputError;
};

struct CaseFile {
    GridCase grid;
    LoopConfig loop;
    CostConfig costs;
    std::string variant;                        // variant that was applied
    std::vector<std::string> defaults_applied;  // "costs.c_zeta = 100", ...
};

// Parses and validates a schema-1 case document. `variant` overrides the
// scenario's variant. Throws InputError listing every violation; JSON syntax
// errors carry line and column.
CaseFile parse_case(const std::string& text, const std::optional<std::string>& variant = {});
CaseFile load_case(const std::filesystem::path& path, const std::optional<std::string>& variant = {});

// Writes the resolved case (variant applied, every optional key explicit).
std::string serialize_case(const CaseFile& file);

// Summary metrics recomputed from an allocation.
struct MetricTable {
    double M = 0.0;             // s, all units
    double D = 0.0;             // p.u., all units
    double inertia_MWs2 = 0.0;  // sum over converters of m_j * p_g,j
    double damping_MWs = 0.0;   // sum over converters of d_j * p_g,j
    double zeta_min = 0.0;
    double sigma_max = 0.0;
    double rocof_hz_s = 0.0;
    double nadir_hz = 0.0;
    std::string nadir_regime;
    bool stable = false;
    double h2 = 0.0;
    double hinf = 0.0;
};

MetricTable compute_metrics(const GridCase& grid, const AllocationState& alloc, const LoopConfig& loop);
std::string metrics_to_json(const MetricTable& metrics);

struct ResultBundle {
    GridCase grid;
    AllocationState alloc;  // terminal allocation
    MetricTable metrics;    // recomputed from `alloc`
    IterationTrace trace;
};

ResultBundle make_bundle(const GridCase& grid, const LoopConfig& loop, IterationTrace trace);

// allocation.csv, metrics.json, trace.csv, trace_modes.csv and one
// spectrum_<tag>.csv per snapshot. Throws IoError on unwritable targets.
void export_bundle(const ResultBundle& bundle, const std::filesystem::path& dir);

void write_allocation_csv(std::ostream& out, const GridCase& grid, const AllocationState& alloc);
AllocationState read_allocation_csv(const std::filesystem::path& path, const GridCase& grid);
void write_trace_header(std::ostream& out, const GridCase& grid, const std::vector<int>& controllable);
void write_trace_row(std::ostream& out, const TraceRow& row, const std::vector<int>& controllable);
void write_trace_csv(std::ostream& out, const GridCase& grid, const IterationTrace& trace);
void write_spectrum_csv(std::ostream& out, const Eigen::VectorXcd& lambdas);

// Streams trace rows as CSV while the allocator runs.
class CsvTraceSink : public TraceSink {
 public:
    CsvTraceSink(std::ostream& out, const GridCase& grid) : out_(out), grid_(grid) {}
    void on_row(const IterationTrace& trace, const TraceRow& row) override;

 private:
    std::ostream& out_;
    const GridCase& grid_;
    bool header_written_ = false;
};

}  // namespace vsmalloc
