#include "exvqa/optimizer.hpp"

#include <cmath>

#include "exvqa/error.hpp"

namespace exvqa {

double LrSchedule::at(std::size_t step) const {
  if (total_steps <= 1) return step == 0 ? start : end;
  if (step >= total_steps - 1) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return start + (end - start) * frac;
}

AdamOptimizer::AdamOptimizer(ParamList params, LrSchedule schedule, AdamHyper hyper)
    : params_(std::move(params)), schedule_(schedule), hyper_(hyper) {
  if (schedule_.end > schedule_.start) throw ConfigError("lr_end must not exceed lr_start");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->size(), 0.0f);
    v_.emplace_back(p.tensor->size(), 0.0f);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p.tensor->zero_grad();
}

void AdamOptimizer::step() {
  for (const auto& p : params_)
    if (!p.tensor->has_grad()) throw ContractError("optimizer step without gradient for '" + p.name + "'");

  const double lr = schedule_.at(step_);
  const double t = static_cast<double>(step_ + 1);
  const double bc1 = 1.0 - std::pow(hyper_.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper_.beta2, t);
  const float b1 = static_cast<float>(hyper_.beta1), b2 = static_cast<float>(hyper_.beta2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] = static_cast<float>(w[j] - lr * mhat / (std::sqrt(vhat) + hyper_.eps));
      if (!std::isfinite(w[j])) throw ContractError("parameter '" + params_[i].name + "' became non-finite");
    }
    p.clear_grad();
  }
  ++step_;
}

}  // namespace exvqa
