#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "exvqa/grad_check.hpp"

namespace exvqa::selftest {

/// One primitive wired into a scalar function over random inputs.
struct GradCase {
  std::string name;
  std::vector<std::unique_ptr<Tensor>> inputs;
  ScalarFunction fn;

  std::vector<Tensor*> input_ptrs() const;
};

/// Every differentiable primitive, each fed inputs drawn from `seed`.
std::vector<GradCase> primitive_grad_cases(std::uint64_t seed);

struct CheckLine {
  std::string name;
  bool passed;
  std::string detail;
};

std::vector<CheckLine> run_primitive_grad_suite(int seeds, double tol);
/// Fusion MLPs feeding a d=8, 1-layer decoder, checked end to end.
CheckLine run_fusion_decoder_grad_check(int seeds, double tol);
/// search_topk against a plain exhaustive scan, with duplicated rows and
/// queries equal to stored rows so that exact ties occur.
std::vector<CheckLine> run_retrieval_oracle(int passages, int queries, std::uint64_t seed);
/// Hand-computed metric cases.
std::vector<CheckLine> run_metric_fixtures();

}  // namespace exvqa::selftest
