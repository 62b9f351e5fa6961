#pragma once

// Data-parallel inner loops behind the tensor library.
//
// Every routine exists as a portable scalar reference plus optional AVX2 and
// NEON variants chosen at runtime. The vector variants keep the exact
// per-element operation order of the scalar reference (separate multiply and
// add, no fused multiply-add, vectorized across independent outputs only), so
// all backends are bit-identical. Reductions run along a row-major sequential
// order which is what makes training runs reproducible.

#include <cstddef>
#include <span>
#include <string_view>

namespace exvqa::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend backend);

struct KernelTable {
  Backend backend;
  // y[i] += a * x[i]
  void (*axpy)(float a, const float* x, float* y, std::size_t n);
  // out[i] = a[i] + b[i]
  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const float* a, const float* b, float* out, std::size_t n);
  // out[i] = s * x[i]
  void (*scale)(float s, const float* x, float* out, std::size_t n);
  // c[m x n] = a[m x k] * b[k x n], all row-major, c overwritten
  void (*gemm)(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b, float* c);
};

bool supported(Backend backend);
const KernelTable& table(Backend backend);

/// Kernel table in use. Picks the widest supported backend on first call
/// unless EXVQA_KERNELS=scalar|avx2|neon is set.
const KernelTable& active();

/// Overrides the runtime choice. Throws ContractError for unsupported backends.
void select(Backend backend);

// Span front-ends over the active table.
void axpy(float a, std::span<const float> x, std::span<float> y);
void add(std::span<const float> a, std::span<const float> b, std::span<float> out);
void mul(std::span<const float> a, std::span<const float> b, std::span<float> out);
void scale(float s, std::span<const float> x, std::span<float> out);
void gemm(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,
          std::span<const float> b, std::span<float> c);

// Generic scalar reference. The float table entries of the scalar backend are
// these templates; the double instantiations serve the 64-bit gradient checker.
namespace scalar {

template <class T>
void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T prod = a * x[i];
    y[i] = y[i] + prod;
  }
}

template <class T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void scale(T s, const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * x[i];
}

template <class T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* row = c + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, row, n);
  }
}

}  // namespace scalar

namespace detail {
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();
}  // namespace detail

}  // namespace exvqa::kernels
