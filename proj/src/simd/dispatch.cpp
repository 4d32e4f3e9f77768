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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "bitrec/simd.hpp"

namespace bitrec::simd {
namespace {

template <class T>
KernelTable<T> scalar_table() {
  return {static_cast<T (*)(const T*, const T*, std::size_t)>(&scalar::dot),
          static_cast<void (*)(T, const T*, T*, std::size_t)>(&scalar::axpy),
          static_cast<void (*)(T, T*, std::size_t)>(&scalar::scale)};
}

#if defined(BITREC_HAVE_AVX2)
template <class T>
KernelTable<T> avx2_table() {
  return {static_cast<T (*)(const T*, const T*, std::size_t)>(&avx2::dot),
          static_cast<void (*)(T, const T*, T*, std::size_t)>(&avx2::axpy),
          static_cast<void (*)(T, T*, std::size_t)>(&avx2::scale)};
}
#endif

#if defined(BITREC_HAVE_NEON)
template <class T>
KernelTable<T> neon_table() {
  return {static_cast<T (*)(const T*, const T*, std::size_t)>(&neon::dot),
          static_cast<void (*)(T, const T*, T*, std::size_t)>(&neon::axpy),
          static_cast<void (*)(T, T*, std::size_t)>(&neon::scale)};
}
#endif

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#if defined(BITREC_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(BITREC_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() {
  if (const char* env = std::getenv("BITREC_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && supported(Isa::kAvx2)) return Isa::kAvx2;
    if (want == "neon" && supported(Isa::kNeon)) return Isa::kNeon;
  }
  if (supported(Isa::kAvx2)) return Isa::kAvx2;
  if (supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument("SIMD variant '" + std::string(to_string(isa)) +
                                "' is not available on this machine");
  }
  active().store(isa, std::memory_order_relaxed);
}

template <class T>
const KernelTable<T>& kernels_for(Isa isa) {
  static const KernelTable<T> scalar = scalar_table<T>();
  if constexpr (!std::is_same_v<T, long double>) {
#if defined(BITREC_HAVE_AVX2)
  static const KernelTable<T> avx = avx2_table<T>();
  if (isa == Isa::kAvx2) return avx;
#endif
#if defined(BITREC_HAVE_NEON)
  static const KernelTable<T> nn = neon_table<T>();
  if (isa == Isa::kNeon) return nn;
#endif
  }
  (void)isa;
  return scalar;
}

template <class T>
const KernelTable<T>& kernels() {
  return kernels_for<T>(active_isa());
}

template const KernelTable<float>& kernels_for<float>(Isa);
template const KernelTable<double>& kernels_for<double>(Isa);
template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();
template const KernelTable<long double>& kernels_for<long double>(Isa);
template const KernelTable<long double>& kernels<long double>();

}  // namespace bitrec::simd
