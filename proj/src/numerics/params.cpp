#include "exvqa/params.hpp"

#include <cstdio>
#include <cstring>

#include "exvqa/hash.hpp"

namespace exvqa {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Tensor normal_param(Shape dims, double stddev, Rng& rng) {
  auto t = Tensor::zeros(std::move(dims));
  std::normal_distribution<float> dist(0.0f, static_cast<float>(stddev));
  for (float& v : t.data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

Tensor constant_param(Shape dims, float value) {
  auto t = Tensor::full(std::move(dims), value);
  t.set_requires_grad(true);
  return t;
}

void randomize(const ParamList& params, double stddev, Rng& rng) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(stddev));
  for (const auto& p : params)
    for (float& v : p.tensor->data()) v = dist(rng);
}

std::uint64_t fingerprint(const ParamList& params) {
  Fnv1a64 h;
  for (const auto& p : params) {
    h.update(p.name);
    h.update(shape_str(p.tensor->dims()));
    auto data = p.tensor->data();
    h.update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()),
                                           data.size() * sizeof(float)));
  }
  return h.digest();
}

}  // namespace exvqa
