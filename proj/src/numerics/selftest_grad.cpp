#include <sstream>

#include "exvqa/ops.hpp"
#include "exvqa/params.hpp"
#include "exvqa/selftest.hpp"

namespace exvqa::selftest {

std::vector<Tensor*> GradCase::input_ptrs() const {
  std::vector<Tensor*> out;
  for (const auto& t : inputs) out.push_back(t.get());
  return out;
}

namespace {

Tensor* add_input(GradCase& c, Shape dims, Rng& rng) {
  c.inputs.push_back(std::make_unique<Tensor>(normal_param(std::move(dims), 1.0, rng)));
  return c.inputs.back().get();
}

// Random fixed weighting so that upstream gradients are not uniform.
Var weighted_sum(Graph<double>& g, Var v, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto w = BasicTensor<double>::zeros(g.dims(v));
  for (double& x : w.data()) x = dist(rng);
  return ops::sum(g, ops::mul(g, v, g.constant(std::move(w))));
}

}  // namespace

std::vector<GradCase> primitive_grad_cases(std::uint64_t seed) {
  Rng rng(seed * 7919 + 17);
  std::vector<GradCase> cases;
  auto make = [&](std::string name) -> GradCase& {
    cases.push_back(GradCase{std::move(name), {}, {}});
    return cases.back();
  };
  const std::uint64_t ws = seed + 101;

  {
    auto& c = make("matmul");
    Tensor* a = add_input(c, {3, 4}, rng);
    Tensor* b = add_input(c, {4, 5}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::matmul(g, g.param(*a), g.param(*b)), ws); };
  }
  {
    auto& c = make("add");
    Tensor* a = add_input(c, {2, 3}, rng);
    Tensor* b = add_input(c, {2, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::add(g, g.param(*a), g.param(*b)), ws); };
  }
  {
    auto& c = make("mul");
    Tensor* a = add_input(c, {2, 3}, rng);
    Tensor* b = add_input(c, {2, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::mul(g, g.param(*a), g.param(*b)), ws); };
  }
  {
    auto& c = make("add_row");
    Tensor* a = add_input(c, {4, 3}, rng);
    Tensor* b = add_input(c, {1, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::add_row(g, g.param(*a), g.param(*b)), ws); };
  }
  {
    auto& c = make("scale");
    Tensor* a = add_input(c, {3, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::scale(g, g.param(*a), -1.7), ws); };
  }
  {
    auto& c = make("concat_rows");
    Tensor* a = add_input(c, {2, 3}, rng);
    Tensor* b = add_input(c, {1, 3}, rng);
    c.fn = [=](Graph<double>& g) {
      Var parts[] = {g.param(*a), g.param(*b)};
      return weighted_sum(g, ops::concat_rows<double>(g, parts), ws);
    };
  }
  {
    auto& c = make("concat_cols");
    Tensor* a = add_input(c, {3, 2}, rng);
    Tensor* b = add_input(c, {3, 4}, rng);
    c.fn = [=](Graph<double>& g) {
      Var parts[] = {g.param(*a), g.param(*b)};
      return weighted_sum(g, ops::concat_cols<double>(g, parts), ws);
    };
  }
  {
    auto& c = make("slice_rows");
    Tensor* a = add_input(c, {5, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::slice_rows(g, g.param(*a), 1, 3), ws); };
  }
  {
    auto& c = make("slice_cols");
    Tensor* a = add_input(c, {3, 6}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::slice_cols(g, g.param(*a), 2, 3), ws); };
  }
  {
    auto& c = make("transpose");
    Tensor* a = add_input(c, {2, 5}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::transpose(g, g.param(*a)), ws); };
  }
  {
    auto& c = make("sum_pool");
    Tensor* a = add_input(c, {4, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::sum_pool(g, g.param(*a)), ws); };
  }
  {
    auto& c = make("mean_pool");
    Tensor* a = add_input(c, {4, 3}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::mean_pool(g, g.param(*a)), ws); };
  }
  {
    auto& c = make("sum");
    Tensor* a = add_input(c, {3, 2}, rng);
    c.fn = [=](Graph<double>& g) { return ops::sum(g, ops::mul(g, g.param(*a), g.param(*a))); };
  }
  {
    auto& c = make("gelu");
    Tensor* a = add_input(c, {3, 4}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::gelu(g, g.param(*a)), ws); };
  }
  {
    auto& c = make("softmax");
    Tensor* a = add_input(c, {3, 5}, rng);
    c.fn = [=](Graph<double>& g) { return weighted_sum(g, ops::softmax(g, g.param(*a)), ws); };
  }
  {
    auto& c = make("layer_norm");
    Tensor* x = add_input(c, {3, 6}, rng);
    Tensor* gain = add_input(c, {1, 6}, rng);
    Tensor* bias = add_input(c, {1, 6}, rng);
    c.fn = [=](Graph<double>& g) {
      return weighted_sum(g, ops::layer_norm(g, g.param(*x), g.param(*gain), g.param(*bias), 1e-5), ws);
    };
  }
  {
    auto& c = make("embedding");
    Tensor* table = add_input(c, {6, 4}, rng);
    c.fn = [=](Graph<double>& g) {
      const std::int32_t ids[] = {2, 0, 2, 5};
      return weighted_sum(g, ops::embedding<double>(g, g.param(*table), ids), ws);
    };
  }
  {
    auto& c = make("cross_entropy");
    Tensor* logits = add_input(c, {4, 7}, rng);
    c.fn = [=](Graph<double>& g) {
      const std::int32_t targets[] = {3, -1, 0, 6};
      return ops::cross_entropy<double>(g, g.param(*logits), targets, -1);
    };
  }
  return cases;
}

std::vector<CheckLine> run_primitive_grad_suite(int seeds, double tol) {
  std::vector<CheckLine> lines;
  const auto names = primitive_grad_cases(0);
  for (std::size_t i = 0; i < names.size(); ++i) {
    double worst = 0.0;
    std::string where;
    bool ok = true;
    for (int s = 0; s < seeds; ++s) {
      auto cases = primitive_grad_cases(static_cast<std::uint64_t>(s));
      auto ptrs = cases[i].input_ptrs();
      auto r = grad_check(cases[i].fn, ptrs, tol);
      ok = ok && r.passed;
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        where = "seed " + std::to_string(s) + " " + r.worst;
      }
    }
    std::ostringstream os;
    os << "max rel err " << worst << " (" << where << ")";
    lines.push_back({"grad " + names[i].name, ok, os.str()});
  }
  return lines;
}

}  // namespace exvqa::selftest
