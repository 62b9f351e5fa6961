#include <cmath>
#include <numbers>

#include "doctest.h"
#include "exvqa/grad_check.hpp"
#include "exvqa/kernels.hpp"
#include "exvqa/ops.hpp"
#include "exvqa/optimizer.hpp"
#include "exvqa/selftest.hpp"
#include "test_util.hpp"

using namespace exvqa;
using exvqa::testing::random_tensor;

namespace {

Tensor make(Shape dims, std::vector<float> v, bool trainable = false) {
  auto t = Tensor::from(std::move(dims), std::move(v));
  t.set_requires_grad(trainable);
  return t;
}

}  // namespace

TEST_CASE("tensor constructors enforce the invariants") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({1}, {NAN}), ContractError);
  CHECK_THROWS_AS(Tensor::from({1}, {INFINITY}), ContractError);
  auto t = Tensor::zeros({2, 3});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("matmul examples") {
  Graph<float> g;
  auto a = make({2, 2}, {1, 2, 3, 4});
  auto eye = make({2, 2}, {1, 0, 0, 1});
  auto col = make({2, 1}, {5, 6});
  auto av = g.param(a);
  CHECK(g.value(ops::matmul(g, av, g.param(eye))).storage() == std::vector<float>{1, 2, 3, 4});
  CHECK(g.value(ops::matmul(g, av, g.param(col))).storage() == std::vector<float>{17, 39});

  auto z = Tensor::zeros({2, 3});
  auto any = random_tensor({3, 4}, 9);
  auto out = g.value(ops::matmul(g, g.param(z), g.param(any)));
  CHECK(out.dims() == Shape{2, 4});
  for (float v : out.data()) CHECK(v == 0.0f);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph<float> g;
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  try {
    ops::matmul(g, g.param(a), g.param(b));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3] x [2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax examples") {
  Graph<float> g;
  auto a = make({1, 2}, {0, 0});
  auto b = make({1, 2}, {1000, 0});
  auto c = make({1, 2}, {static_cast<float>(std::numbers::ln2), 0});
  auto sa = g.value(ops::softmax(g, g.param(a)));
  CHECK(sa[0] == doctest::Approx(0.5));
  CHECK(sa[1] == doctest::Approx(0.5));
  auto sb = g.value(ops::softmax(g, g.param(b)));
  CHECK(sb[0] == doctest::Approx(1.0));
  CHECK(sb[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(sb[1]));
  auto sc = g.value(ops::softmax(g, g.param(c)));
  CHECK(sc[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(sc[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one for large-magnitude inputs") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Graph<float> g;
    auto x = random_tensor({4, 17}, seed, 3000.0f);
    for (float& v : x.data()) v = std::clamp(v, -1e4f, 1e4f);
    auto y = g.value(ops::softmax(g, g.param(x)));
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0;
      for (float v : y.row(r)) {
        CHECK(v >= 0.0f);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("layer_norm examples") {
  Graph<float> g;
  auto one3 = make({3}, {1, 1, 1}), zero3 = make({3}, {0, 0, 0});
  auto c = make({1, 3}, {5, 5, 5});
  auto yc = g.value(ops::layer_norm(g, g.param(c), g.param(one3), g.param(zero3), 1e-5));
  for (float v : yc.data()) CHECK(v == 0.0f);

  auto one2 = make({2}, {1, 1}), zero2 = make({2}, {0, 0});
  auto x = make({1, 2}, {1, -1});
  auto y = g.value(ops::layer_norm(g, g.param(x), g.param(one2), g.param(zero2), 1e-12));
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(y[1] == doctest::Approx(-1.0).epsilon(1e-5));

  auto gain0 = make({3}, {0, 0, 0}), bias = make({3}, {0.5f, -2, 7});
  auto r = random_tensor({4, 3}, 3);
  auto yr = g.value(ops::layer_norm(g, g.param(r), g.param(gain0), g.param(bias), 1e-5));
  for (std::size_t i = 0; i < yr.rows(); ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(yr.at(i, j) == bias[j]);
}

TEST_CASE("layer_norm normalizes each slice") {
  Graph<float> g;
  auto x = random_tensor({5, 16}, 21, 4.0f);
  auto one = Tensor::full({16}, 1.0f), zero = Tensor::zeros({16});
  auto y = g.value(ops::layer_norm(g, g.param(x), g.param(one), g.param(zero), 1e-5));
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (float v : y.row(r)) mean += v;
    mean /= 16;
    for (float v : y.row(r)) var += (v - mean) * (v - mean);
    var /= 16;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("cross_entropy examples") {
  {
    Graph<float> g;
    auto logits = Tensor::zeros({3, 1000});
    const std::int32_t targets[] = {4, 999, 0};
    auto loss = g.value(ops::cross_entropy<float>(g, g.param(logits), targets, -1));
    CHECK(loss[0] == doctest::Approx(std::log(1000.0)).epsilon(1e-4));
    CHECK(std::abs(loss[0] - 6.9078) < 1e-3);
  }
  {
    Graph<float> g;
    auto logits = make({1, 3}, {60.0f, 0.0f, 0.0f});
    const std::int32_t targets[] = {0};
    CHECK(g.value(ops::cross_entropy<float>(g, g.param(logits), targets, -1))[0] < 1e-6);
  }
  {
    Graph<float> g;
    const float l2 = static_cast<float>(std::numbers::ln2);
    auto logits = make({2, 2}, {l2, 0, l2, 0});
    const std::int32_t targets[] = {0, 0};
    CHECK(g.value(ops::cross_entropy<float>(g, g.param(logits), targets, -1))[0] ==
          doctest::Approx(-std::log(2.0 / 3.0)).epsilon(1e-6));
    CHECK(std::abs(-std::log(2.0 / 3.0) - 0.4055) < 1e-4);
  }
}

TEST_CASE("cross_entropy error paths") {
  Graph<float> g;
  auto logits = Tensor::zeros({2, 4});
  const std::int32_t ignored[] = {-1, -1};
  CHECK_THROWS_AS(ops::cross_entropy<float>(g, g.param(logits), ignored, -1), EmptyLossError);
  const std::int32_t bad[] = {1, 4};
  CHECK_THROWS_AS(ops::cross_entropy<float>(g, g.param(logits), bad, -1), IndexError);
  const std::int32_t neg[] = {-3, 1};
  CHECK_THROWS_AS(ops::cross_entropy<float>(g, g.param(logits), neg, -1), IndexError);
}

TEST_CASE("backward examples") {
  SUBCASE("sum gives ones") {
    Graph<float> g;
    auto x = random_tensor({3, 4}, 1);
    g.backward(ops::sum(g, g.param(x)));
    for (float v : x.grad()) CHECK(v == 1.0f);
  }
  SUBCASE("cross entropy gradient is p - onehot") {
    Graph<float> g;
    auto logits = make({1, 2}, {0, 0}, true);
    const std::int32_t target[] = {0};
    g.backward(ops::cross_entropy<float>(g, g.param(logits), target, -1));
    CHECK(logits.grad()[0] == doctest::Approx(-0.5));
    CHECK(logits.grad()[1] == doctest::Approx(0.5));
  }
  SUBCASE("disconnected parameter receives zeros") {
    Graph<float> g;
    auto x = random_tensor({2, 2}, 2);
    auto lonely = random_tensor({3}, 3);
    g.param(lonely);
    g.backward(ops::sum(g, g.param(x)));
    REQUIRE(lonely.has_grad());
    for (float v : lonely.grad()) CHECK(v == 0.0f);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Graph<float> g;
    auto x = random_tensor({2, 2}, 2);
    CHECK_THROWS_AS(g.backward(g.param(x)), ContractError);
  }
}

TEST_CASE("tape replay is deterministic") {
  Graph<float> g;
  auto a = random_tensor({4, 6}, 11);
  auto b = random_tensor({6, 5}, 12);
  auto h = ops::gelu(g, ops::matmul(g, g.param(a), g.param(b)));
  auto s = ops::softmax(g, h);
  auto loss = ops::sum(g, ops::mul(g, s, h));
  g.backward(loss);
  const auto ga = a.grad();
  std::vector<float> first(ga.begin(), ga.end());
  a.clear_grad();
  b.clear_grad();
  g.backward(loss);
  CHECK(std::vector<float>(a.grad().begin(), a.grad().end()) == first);
}

TEST_CASE("tape records inputs before outputs") {
  Graph<float> g;
  auto a = random_tensor({2, 2}, 1);
  auto y = ops::gelu(g, ops::add(g, g.param(a), g.param(a)));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (auto in : g.node_at(static_cast<std::int32_t>(i)).inputs) CHECK(in < static_cast<std::int32_t>(i));
  CHECK(y.id == static_cast<std::int32_t>(g.size() - 1));
}

TEST_CASE("grad_check examples") {
  auto x = random_tensor({5}, 4);
  std::vector<Tensor*> in{&x};
  auto square = [&](Graph<double>& g) {
    Var v = g.param(x);
    return ops::sum(g, ops::mul(g, v, v));
  };
  CHECK(grad_check(square, in, 1e-3).passed);

  auto logits = random_tensor({3, 6}, 5);
  std::vector<Tensor*> lin{&logits};
  auto ce = [&](Graph<double>& g) {
    const std::int32_t t[] = {1, 5, 0};
    Var p = ops::softmax(g, g.param(logits));
    return ops::cross_entropy<double>(g, p, t, -1);
  };
  CHECK(grad_check(ce, lin, 1e-3).passed);

  // Negative control: a square op whose backward rule forgets the factor 2.
  auto broken = [&](Graph<double>& g) {
    Var v = g.param(x);
    auto val = g.value(v);
    for (double& e : val.data()) e = e * e;
    Var sq = g.record(std::move(val), {v}, [](Graph<double>& gr, std::int32_t self) {
      Var in{gr.node_at(self).inputs[0]};
      auto up = gr.grad_buffer(self);
      auto dst = gr.grad_buffer(in.id);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += up[i] * gr.value(in)[i];
    });
    return ops::sum(g, sq);
  };
  CHECK_FALSE(grad_check(broken, in, 1e-3).passed);

  auto non_scalar = [&](Graph<double>& g) { return g.param(x); };
  CHECK_THROWS_AS(grad_check(non_scalar, in, 1e-3), ContractError);
}

TEST_CASE("grad_check leaves the float gradients untouched") {
  auto x = random_tensor({3}, 8);
  std::vector<Tensor*> in{&x};
  grad_check([&](Graph<double>& g) { return ops::sum(g, g.param(x)); }, in, 1e-3);
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("every primitive passes the gradient check") {
  for (const auto& line : selftest::run_primitive_grad_suite(4, 1e-3)) {
    INFO(line.name << ": " << line.detail);
    CHECK(line.passed);
  }
}

TEST_CASE("float graph is backend independent") {
  auto run = [](kernels::Backend b) {
    kernels::select(b);
    Graph<float> g;
    auto a = random_tensor({7, 40}, 31);
    auto w = random_tensor({40, 37}, 32);
    Var h = ops::gelu(g, ops::matmul(g, g.param(a), g.param(w)));
    g.backward(ops::sum(g, ops::mul(g, h, h)));
    std::vector<float> out(g.value(h).data().begin(), g.value(h).data().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), a.grad().begin(), a.grad().end());
    return out;
  };
  const auto original = kernels::active().backend;
  const auto reference = run(kernels::Backend::kScalar);
  for (auto b : {kernels::Backend::kAvx2, kernels::Backend::kNeon})
    if (kernels::supported(b)) CHECK(run(b) == reference);
  kernels::select(original);
}

TEST_CASE("learning-rate schedule") {
  LrSchedule s{2e-5, 1e-5, 100};
  CHECK(s.at(0) == 2e-5);
  CHECK(s.at(99) == 1e-5);
  CHECK(s.at(500) == 1e-5);
  for (std::size_t i = 1; i < 120; ++i) {
    CHECK(s.at(i) <= s.at(i - 1));
    CHECK(s.at(i) >= 1e-5);
    CHECK(s.at(i) <= 2e-5);
  }
}

TEST_CASE("adam examples") {
  SUBCASE("first step moves each weight by about lr against the gradient sign") {
    auto w = make({4}, {0.5f, -0.5f, 1.0f, 0.0f}, true);
    AdamOptimizer opt({{"w", &w}}, LrSchedule{1e-2, 1e-2, 10});
    w.zero_grad();
    const float grads[] = {250.0f, -1e3f, 40.0f, -7.0f};
    std::copy(std::begin(grads), std::end(grads), w.grad().begin());
    const std::vector<float> before(w.data().begin(), w.data().end());
    opt.step();
    for (std::size_t i = 0; i < 4; ++i) {
      const double expected = before[i] - 1e-2 * (grads[i] > 0 ? 1.0 : -1.0);
      CHECK(w[i] == doctest::Approx(expected).epsilon(1e-5));
    }
    CHECK_FALSE(w.has_grad());
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto w = random_tensor({6}, 3);
    const std::vector<float> before(w.data().begin(), w.data().end());
    AdamOptimizer opt({{"w", &w}}, LrSchedule{});
    opt.zero_grad();
    opt.step();
    CHECK(std::vector<float>(w.data().begin(), w.data().end()) == before);
  }
  SUBCASE("last scheduled step uses lr_end") {
    auto w = random_tensor({2}, 3);
    AdamOptimizer opt({{"w", &w}}, LrSchedule{2e-5, 1e-5, 3});
    CHECK(opt.current_lr() == 2e-5);
    opt.zero_grad();
    opt.step();
    opt.zero_grad();
    opt.step();
    CHECK(opt.current_lr() == 1e-5);
  }
  SUBCASE("missing gradients are a contract error") {
    auto w = random_tensor({2}, 3);
    AdamOptimizer opt({{"w", &w}}, LrSchedule{});
    CHECK_THROWS_AS(opt.step(), ContractError);
  }
  SUBCASE("moment buffers match parameter shapes") {
    auto a = random_tensor({3, 4}, 1), b = random_tensor({5}, 2);
    AdamOptimizer opt({{"a", &a}, {"b", &b}}, LrSchedule{});
    CHECK(opt.first_moment(0).size() == a.size());
    CHECK(opt.second_moment(1).size() == b.size());
  }
}
