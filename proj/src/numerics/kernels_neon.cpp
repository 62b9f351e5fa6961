#include "exvqa/kernels.hpp"

#if defined(__aarch64__) || defined(__ARM_NEON)
#include <arm_neon.h>

namespace exvqa::kernels::detail {

namespace {

// vmulq + vaddq rather than vfmaq to stay bit-identical with scalar.
void axpy(float a, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(va, vld1q_f32(x + i))));
  scalar::axpy(a, x + i, y + i, n - i);
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  scalar::add(a + i, b + i, out + i, n - i);
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  scalar::mul(a + i, b + i, out + i, n - i);
}

void scale(float s, const float* x, float* out, std::size_t n) {
  const float32x4_t vs = vdupq_n_f32(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vs, vld1q_f32(x + i)));
  scalar::scale(s, x + i, out + i, n - i);
}

void gemm(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b, float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    float* row = c + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0f;
    for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, row, n);
  }
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable t{Backend::kNeon, &axpy, &add, &mul, &scale, &gemm};
  return &t;
}

}  // namespace exvqa::kernels::detail

#else

namespace exvqa::kernels::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace exvqa::kernels::detail

#endif
