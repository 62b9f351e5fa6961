#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "exvqa/kernels.hpp"
#include "test_util.hpp"

using namespace exvqa;
using exvqa::testing::random_floats;

namespace {

std::vector<kernels::Backend> vector_backends() {
  std::vector<kernels::Backend> out;
  for (auto b : {kernels::Backend::kAvx2, kernels::Backend::kNeon})
    if (kernels::supported(b)) out.push_back(b);
  return out;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(kernels::supported(kernels::Backend::kScalar));
  CHECK(kernels::table(kernels::Backend::kScalar).backend == kernels::Backend::kScalar);
}

TEST_CASE("elementwise kernels match scalar bit for bit") {
  const auto& ref = kernels::table(kernels::Backend::kScalar);
  for (auto backend : vector_backends()) {
    const auto& simd = kernels::table(backend);
    for (std::size_t n : {1u, 3u, 7u, 8u, 9u, 16u, 31u, 64u, 100u, 1027u}) {
      auto x = random_floats(n, n), y = random_floats(n, n + 1);
      auto y1 = y, y2 = y;
      ref.axpy(0.37f, x.data(), y1.data(), n);
      simd.axpy(0.37f, x.data(), y2.data(), n);
      CHECK(bit_equal(y1, y2));

      std::vector<float> o1(n), o2(n);
      ref.add(x.data(), y.data(), o1.data(), n);
      simd.add(x.data(), y.data(), o2.data(), n);
      CHECK(bit_equal(o1, o2));
      ref.mul(x.data(), y.data(), o1.data(), n);
      simd.mul(x.data(), y.data(), o2.data(), n);
      CHECK(bit_equal(o1, o2));
      ref.scale(-2.5f, x.data(), o1.data(), n);
      simd.scale(-2.5f, x.data(), o2.data(), n);
      CHECK(bit_equal(o1, o2));
    }
  }
}

TEST_CASE("gemm matches scalar bit for bit across panel remainders") {
  const auto& ref = kernels::table(kernels::Backend::kScalar);
  std::mt19937 rng(5);
  for (auto backend : vector_backends()) {
    const auto& simd = kernels::table(backend);
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t m = 1 + rng() % 9, k = 1 + rng() % 70, n = 1 + rng() % 90;
      auto a = random_floats(m * k, 1000 + trial), b = random_floats(k * n, 2000 + trial);
      std::vector<float> c1(m * n, 1.0f), c2(m * n, -1.0f);
      ref.gemm(m, k, n, a.data(), b.data(), c1.data());
      simd.gemm(m, k, n, a.data(), b.data(), c2.data());
      CHECK_MESSAGE(bit_equal(c1, c2), "m=" << m << " k=" << k << " n=" << n);
    }
  }
}

TEST_CASE("gemm computes the matrix product") {
  const float a[] = {1, 2, 3, 4};
  const float b[] = {5, 6};
  std::vector<float> c(2);
  kernels::gemm(2, 2, 1, a, b, c);
  CHECK(c[0] == 17.0f);
  CHECK(c[1] == 39.0f);
}

TEST_CASE("span front-ends reject length mismatch") {
  std::vector<float> x(3), y(4);
  CHECK_THROWS_AS(kernels::axpy(1.0f, x, y), DimensionError);
}

TEST_CASE("select switches backends and rejects unsupported ones") {
  const auto before = kernels::active().backend;
  kernels::select(kernels::Backend::kScalar);
  CHECK(kernels::active().backend == kernels::Backend::kScalar);
  for (auto b : {kernels::Backend::kAvx2, kernels::Backend::kNeon})
    if (!kernels::supported(b)) CHECK_THROWS_AS(kernels::select(b), ContractError);
  kernels::select(before);
}
