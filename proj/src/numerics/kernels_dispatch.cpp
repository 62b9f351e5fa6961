#include <atomic>
#include <cstdlib>
#include <string>

#include "exvqa/error.hpp"
#include "exvqa/kernels.hpp"

namespace exvqa::kernels {

namespace detail {
const KernelTable& scalar_table();
}

namespace {

bool cpu_has_avx2() {
#if defined(EXVQA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& pick_default() {
  if (const char* env = std::getenv("EXVQA_KERNELS")) {
    std::string want(env);
    if (want == "scalar") return detail::scalar_table();
    if (want == "avx2" && supported(Backend::kAvx2)) return *detail::avx2_table();
    if (want == "neon" && supported(Backend::kNeon)) return *detail::neon_table();
  }
  if (supported(Backend::kAvx2)) return *detail::avx2_table();
  if (supported(Backend::kNeon)) return *detail::neon_table();
  return detail::scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{&pick_default()};
  return ptr;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

bool supported(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return true;
    case Backend::kAvx2: return detail::avx2_table() != nullptr && cpu_has_avx2();
    case Backend::kNeon: return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!supported(backend))
    throw ContractError("kernel backend '" + std::string(backend_name(backend)) + "' is not supported here");
  switch (backend) {
    case Backend::kAvx2: return *detail::avx2_table();
    case Backend::kNeon: return *detail::neon_table();
    default: return detail::scalar_table();
  }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Backend backend) { current().store(&table(backend), std::memory_order_release); }

void axpy(float a, std::span<const float> x, std::span<float> y) {
  check_sizes(x.size(), y.size(), "axpy");
  active().axpy(a, x.data(), y.data(), x.size());
}

void add(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  check_sizes(a.size(), b.size(), "add");
  check_sizes(a.size(), out.size(), "add");
  active().add(a.data(), b.data(), out.data(), a.size());
}

void mul(std::span<const float> a, std::span<const float> b, std::span<float> out) {
  check_sizes(a.size(), b.size(), "mul");
  check_sizes(a.size(), out.size(), "mul");
  active().mul(a.data(), b.data(), out.data(), a.size());
}

void scale(float s, std::span<const float> x, std::span<float> out) {
  check_sizes(x.size(), out.size(), "scale");
  active().scale(s, x.data(), out.data(), x.size());
}

void gemm(std::size_t m, std::size_t k, std::size_t n, std::span<const float> a,
          std::span<const float> b, std::span<float> c) {
  check_sizes(a.size(), m * k, "gemm lhs");
  check_sizes(b.size(), k * n, "gemm rhs");
  check_sizes(c.size(), m * n, "gemm out");
  active().gemm(m, k, n, a.data(), b.data(), c.data());
}

}  // namespace exvqa::kernels
