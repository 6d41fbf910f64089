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

#include <cstddef>
#include <string_view>

// Small dense vector kernels used on the hot paths of the simplex tableau
// (row elimination) and the RK4 integrator (matrix-vector products).
//
// Each kernel has a portable scalar reference and, where the build target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is
// chosen once at runtime from the CPU feature flags. Vector variants reorder
// floating-point additions, so results agree with the scalar reference to a
// few ulps rather than bit-for-bit; within one process the choice is fixed and
// every run is reproducible.
namespace vsmalloc::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa) noexcept;

// Best instruction set the running CPU supports and this binary was built for.
Isa detected_isa() noexcept;

// Instruction set currently used by the dispatching entry points below.
Isa active_isa() noexcept;

// Overrides the dispatch choice. Throws vsmalloc::InputError if the requested
// set is unavailable on this CPU or was not compiled in. Intended for tests.
void force_isa(Isa isa);

// Dispatching entry points.
double dot(const double* a, const double* b, std::size_t n) noexcept;
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
// y = A x for a row-major rows x cols matrix A.
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) noexcept;

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) noexcept;
}  // namespace scalar

#if defined(VSMALLOC_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) noexcept;
}  // namespace avx2
#endif

#if defined(VSMALLOC_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) noexcept;
}  // namespace neon
#endif

}  // namespace vsmalloc::simd
