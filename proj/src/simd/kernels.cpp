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

#include "vsmalloc/simd/kernels.hpp"

#include <atomic>
#include <string>

#include "vsmalloc/error.hpp"

namespace vsmalloc::simd {

namespace {

struct KernelTable {
    Isa isa;
    double (*dot)(const double*, const double*, std::size_t) noexcept;
    void (*axpy)(double, const double*, double*, std::size_t) noexcept;
    void (*gemv)(const double*, std::size_t, std::size_t, const double*, double*) noexcept;
};

constexpr KernelTable kScalarTable{Isa::kScalar, &scalar::dot, &scalar::axpy, &scalar::gemv};
#if defined(VSMALLOC_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Isa::kAvx2, &avx2::dot, &avx2::axpy, &avx2::gemv};
#endif
#if defined(VSMALLOC_HAVE_NEON)
constexpr KernelTable kNeonTable{Isa::kNeon, &neon::dot, &neon::axpy, &neon::gemv};
#endif

bool cpu_supports(Isa isa) noexcept {
    switch (isa) {
        case Isa::kScalar:
            return true;
        case Isa::kAvx2:
#if defined(VSMALLOC_HAVE_AVX2)
            __builtin_cpu_init();
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::kNeon:
#if defined(VSMALLOC_HAVE_NEON)
            return true;  // Advanced SIMD is mandatory on aarch64.
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* table_for(Isa isa) noexcept {
    switch (isa) {
#if defined(VSMALLOC_HAVE_AVX2)
        case Isa::kAvx2:
            return &kAvx2Table;
#endif
#if defined(VSMALLOC_HAVE_NEON)
        case Isa::kNeon:
            return &kNeonTable;
#endif
        default:
            return &kScalarTable;
    }
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{table_for(detected_isa())};
    return table;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::kScalar:
            return "scalar";
        case Isa::kAvx2:
            return "avx2";
        case Isa::kNeon:
            return "neon";
    }
    return "unknown";
}

Isa detected_isa() noexcept {
    if (cpu_supports(Isa::kAvx2)) return Isa::kAvx2;
    if (cpu_supports(Isa::kNeon)) return Isa::kNeon;
    return Isa::kScalar;
}

Isa active_isa() noexcept { return active_table().load(std::memory_order_acquire)->isa; }

void force_isa(Isa isa) {
    if (!cpu_supports(isa)) {
        throw InputError("instruction set '" + std::string(isa_name(isa)) +
                         "' is not available on this machine/build");
    }
    active_table().store(table_for(isa), std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
    return active_table().load(std::memory_order_acquire)->dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
    active_table().load(std::memory_order_acquire)->axpy(alpha, x, y, n);
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) noexcept {
    active_table().load(std::memory_order_acquire)->gemv(a, rows, cols, x, y);
}

}  // namespace vsmalloc::simd
