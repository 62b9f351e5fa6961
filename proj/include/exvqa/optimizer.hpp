#pragma once

#include <cstddef>
#include <vector>

#include "exvqa/params.hpp"

namespace exvqa {

/// Linear decay from `start` at step 0 to `end` at step total_steps - 1,
/// held at `end` afterwards.
struct LrSchedule {
  double start = 2e-5;
  double end = 1e-5;
  std::size_t total_steps = 1;

  double at(std::size_t step) const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers live alongside the parameter
/// list given at construction.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamList params, LrSchedule schedule, AdamHyper hyper = {});

  /// One update over every parameter, then clears the gradients. Throws
  /// ContractError if any parameter has no gradient buffer.
  void step();

  std::size_t step_count() const noexcept { return step_; }
  /// Learning rate the next step() will use.
  double current_lr() const { return schedule_.at(step_); }
  const LrSchedule& schedule() const noexcept { return schedule_; }
  const ParamList& params() const noexcept { return params_; }
  const std::vector<float>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<float>& second_moment(std::size_t i) const { return v_.at(i); }

  /// Allocates zeroed gradients for every parameter.
  void zero_grad();

 private:
  ParamList params_;
  LrSchedule schedule_;
  AdamHyper hyper_;
  std::vector<std::vector<float>> m_, v_;
  std::size_t step_ = 0;
};

}  // namespace exvqa
