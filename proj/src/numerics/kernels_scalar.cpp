#include "exvqa/kernels.hpp"

namespace exvqa::kernels::detail {

namespace {

void gemm_f(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b, float* c) {
  scalar::gemm<float>(m, k, n, a, b, c);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Backend::kScalar, &scalar::axpy<float>, &scalar::add<float>,
                             &scalar::mul<float>, &scalar::scale<float>, &gemm_f};
  return t;
}

}  // namespace exvqa::kernels::detail
