// Copyright 2026 The BITRec Authors
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

namespace bitrec::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

/// Kernel table for one element type. All variants compute the same
/// quantities; they differ only in summation order, so results agree to
/// rounding but not bit-for-bit across ISAs. Within one process the selected
/// table never changes unless set_isa() is called.
template <class T>
struct KernelTable {
  T (*dot)(const T* a, const T* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  /// y *= alpha
  void (*scale)(T alpha, T* y, std::size_t n);
};

namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(float alpha, float* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
/// Extended precision has no vector variant; it backs the gradient oracle.
long double dot(const long double* a, const long double* b, std::size_t n);
void axpy(long double alpha, const long double* x, long double* y, std::size_t n);
void scale(long double alpha, long double* y, std::size_t n);
}  // namespace scalar

#if defined(BITREC_HAVE_AVX2)
namespace avx2 {
float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(float alpha, float* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
}  // namespace avx2
#endif

#if defined(BITREC_HAVE_NEON)
namespace neon {
float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(float alpha, float* y, std::size_t n);
void scale(double alpha, double* y, std::size_t n);
}  // namespace neon
#endif

/// True when the variant was compiled in and the CPU can execute it.
bool supported(Isa isa);

/// Best supported ISA, unless BITREC_SIMD=scalar|avx2|neon requests another.
Isa detect_isa();

Isa active_isa();
/// Switches the active table. Not thread-safe; intended for tests and for
/// process start-up. Throws std::invalid_argument if unsupported.
void set_isa(Isa isa);

template <class T>
const KernelTable<T>& kernels_for(Isa isa);

template <class T>
const KernelTable<T>& kernels();

template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
  return kernels<T>().dot(a, b, n);
}
template <class T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  kernels<T>().axpy(alpha, x, y, n);
}
template <class T>
inline void scale(T alpha, T* y, std::size_t n) {
  kernels<T>().scale(alpha, y, n);
}

}  // namespace bitrec::simd
