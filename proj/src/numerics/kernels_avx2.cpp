// Built with -mavx2 only; callers reach it through the dispatch table after a
// CPUID check. FMA is intentionally left disabled (bit parity with scalar).
#include "exvqa/kernels.hpp"

#if defined(EXVQA_HAVE_AVX2)
#include <immintrin.h>

namespace exvqa::kernels::detail {

namespace {

void axpy(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  scalar::axpy(a, x + i, y + i, n - i);
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  scalar::add(a + i, b + i, out + i, n - i);
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  scalar::mul(a + i, b + i, out + i, n - i);
}

void scale(float s, const float* x, float* out, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_mul_ps(vs, _mm256_loadu_ps(x + i)));
  scalar::scale(s, x + i, out + i, n - i);
}

// Row of c kept in registers for 32-wide column panels; the k loop stays
// sequential so each output sees the same add order as the scalar reference.
void gemm(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 32 <= n; j += 32) {
      __m256 c0 = _mm256_setzero_ps(), c1 = _mm256_setzero_ps();
      __m256 c2 = _mm256_setzero_ps(), c3 = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 va = _mm256_set1_ps(arow[p]);
        const float* brow = b + p * n + j;
        c0 = _mm256_add_ps(c0, _mm256_mul_ps(va, _mm256_loadu_ps(brow)));
        c1 = _mm256_add_ps(c1, _mm256_mul_ps(va, _mm256_loadu_ps(brow + 8)));
        c2 = _mm256_add_ps(c2, _mm256_mul_ps(va, _mm256_loadu_ps(brow + 16)));
        c3 = _mm256_add_ps(c3, _mm256_mul_ps(va, _mm256_loadu_ps(brow + 24)));
      }
      _mm256_storeu_ps(crow + j, c0);
      _mm256_storeu_ps(crow + j + 8, c1);
      _mm256_storeu_ps(crow + j + 16, c2);
      _mm256_storeu_ps(crow + j + 24, c3);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p)
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(arow[p]), _mm256_loadu_ps(b + p * n + j)));
      _mm256_storeu_ps(crow + j, acc);
    }
    for (; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) {
        float prod = arow[p] * b[p * n + j];
        acc = acc + prod;
      }
      crow[j] = acc;
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{Backend::kAvx2, &axpy, &add, &mul, &scale, &gemm};
  return &t;
}

}  // namespace exvqa::kernels::detail

#else

namespace exvqa::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace exvqa::kernels::detail

#endif
