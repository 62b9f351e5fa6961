#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "exvqa/tensor.hpp"

namespace exvqa {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Tensor* tensor;
};
using ParamList = std::vector<NamedParam>;

/// Trainable tensor drawn from N(0, stddev^2).
Tensor normal_param(Shape dims, double stddev, Rng& rng);
/// Trainable tensor filled with a constant.
Tensor constant_param(Shape dims, float value);

/// Redraws every value from N(0, stddev^2). Used by gradient checks, which
/// need unit-scale parameters for a 1e-3 finite-difference step.
void randomize(const ParamList& params, double stddev, Rng& rng);

/// FNV-1a over the names, shapes and raw bytes of every tensor, in list order.
std::uint64_t fingerprint(const ParamList& params);

}  // namespace exvqa
