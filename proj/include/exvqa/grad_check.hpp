#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "exvqa/graph.hpp"

namespace exvqa {

struct GradCheckOptions {
  double step = 1e-3;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-3;
  /// Elements probed per input tensor; 0 probes every element. Sampled
  /// elements are drawn with `sample_seed`.
  std::size_t max_elements_per_tensor = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t elements_checked = 0;
  std::string worst;  // "<tensor index>[<element>]: analytic vs numeric"
};

/// Builds a scalar on a fresh double-precision graph.
using ScalarFunction = std::function<Var(Graph<double>&)>;

/// Compares reverse-mode gradients with central finite differences, both in
/// 64-bit arithmetic. `f` must reach each input through Graph::param().
GradCheckReport grad_check(const ScalarFunction& f, std::span<Tensor* const> inputs, double tol,
                           const GradCheckOptions& options = {});

}  // namespace exvqa
