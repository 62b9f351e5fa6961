#include "exvqa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace exvqa {

namespace {

double evaluate(const ScalarFunction& f, const Tensor* target, std::size_t index, double delta) {
  Graph<double> g(false);
  g.set_perturbation(target, index, delta);
  Var out = f(g);
  if (g.value(out).size() != 1) throw ContractError("grad_check needs a scalar-valued function");
  return g.value(out)[0];
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, std::span<Tensor* const> inputs, double tol,
                           const GradCheckOptions& options) {
  Graph<double> g;
  Var out = f(g);
  if (g.value(out).size() != 1)
    throw ContractError("grad_check needs a scalar-valued function, got " + shape_str(g.dims(out)));

  std::vector<std::vector<float>> saved_grads;
  for (Tensor* t : inputs) saved_grads.emplace_back(t->grad().begin(), t->grad().end());
  g.backward(out);
  std::vector<std::vector<double>> analytic;
  for (Tensor* t : inputs) analytic.push_back(g.grad(g.param(*t)));
  // backward() also accumulated into the float tensors; put them back.
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (saved_grads[i].empty())
      inputs[i]->clear_grad();
    else
      std::copy(saved_grads[i].begin(), saved_grads[i].end(), inputs[i]->grad().begin());
  }

  GradCheckReport report;
  std::mt19937_64 pick(options.sample_seed);
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    std::vector<std::size_t> elems(inputs[ti]->size());
    std::iota(elems.begin(), elems.end(), std::size_t{0});
    if (options.max_elements_per_tensor && elems.size() > options.max_elements_per_tensor) {
      std::shuffle(elems.begin(), elems.end(), pick);
      elems.resize(options.max_elements_per_tensor);
      std::sort(elems.begin(), elems.end());
    }
    for (std::size_t e : elems) {
      const double plus = evaluate(f, inputs[ti], e, options.step);
      const double minus = evaluate(f, inputs[ti], e, -options.step);
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[ti][e];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.elements_checked;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        std::ostringstream os;
        os << ti << "[" << e << "]: " << a << " vs " << numeric;
        report.worst = os.str();
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace exvqa
