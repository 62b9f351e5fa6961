#include "exvqa/layers.hpp"

#include <cmath>

#include "exvqa/ops.hpp"

namespace exvqa {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(normal_param({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias(constant_param({1, out}, 0.0f)) {}

template <class T>
Var Linear::forward(Graph<T>& g, Var x) {
  return ops::add_row(g, ops::matmul(g, x, g.param(weight)), g.param(bias));
}

void Linear::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

LayerNorm::LayerNorm(std::size_t d) : gain(constant_param({1, d}, 1.0f)), bias(constant_param({1, d}, 0.0f)) {}

template <class T>
Var LayerNorm::forward(Graph<T>& g, Var x) {
  return ops::layer_norm(g, x, g.param(gain), g.param(bias), 1e-5);
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

TransformerBlock::TransformerBlock(std::size_t d, std::size_t heads_, std::size_t ffn_hidden, Rng& rng)
    : ln_attn(d),
      ln_ffn(d),
      query(d, d, rng),
      key(d, d, rng),
      value(d, d, rng),
      proj(d, d, rng),
      ffn_in(d, ffn_hidden, rng),
      ffn_out(ffn_hidden, d, rng),
      heads(heads_) {
  if (heads == 0 || d % heads != 0)
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                      " heads");
}

template <class T>
Var TransformerBlock::forward(Graph<T>& g, Var x, bool causal) {
  const std::size_t tokens = g.dims(x)[0];
  const std::size_t d = g.dims(x)[1];
  const std::size_t dh = d / heads;

  Var h = ln_attn.forward(g, x);
  Var q = query.forward(g, h);
  Var k = key.forward(g, h);
  Var v = value.forward(g, h);

  Var mask{};
  if (causal && tokens > 1) {
    auto m = BasicTensor<T>::zeros({tokens, tokens});
    for (std::size_t r = 0; r < tokens; ++r)
      for (std::size_t c = r + 1; c < tokens; ++c) m.at(r, c) = T(-1e9);
    mask = g.constant(std::move(m));
  }
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    Var qh = ops::slice_cols(g, q, i * dh, dh);
    Var kh = ops::slice_cols(g, k, i * dh, dh);
    Var vh = ops::slice_cols(g, v, i * dh, dh);
    Var scores = ops::scale(g, ops::matmul(g, qh, ops::transpose(g, kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (mask.valid()) scores = ops::add(g, scores, mask);
    outs.push_back(ops::matmul(g, ops::softmax(g, scores), vh));
  }
  Var attn = heads == 1 ? outs[0] : ops::concat_cols<T>(g, outs);
  x = ops::add(g, x, proj.forward(g, attn));

  Var f = ffn_out.forward(g, ops::gelu(g, ffn_in.forward(g, ln_ffn.forward(g, x))));
  return ops::add(g, x, f);
}

void TransformerBlock::collect(const std::string& prefix, ParamList& out) {
  ln_attn.collect(prefix + ".ln_attn", out);
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  proj.collect(prefix + ".proj", out);
  ln_ffn.collect(prefix + ".ln_ffn", out);
  ffn_in.collect(prefix + ".ffn_in", out);
  ffn_out.collect(prefix + ".ffn_out", out);
}

template Var Linear::forward<float>(Graph<float>&, Var);
template Var Linear::forward<double>(Graph<double>&, Var);
template Var LayerNorm::forward<float>(Graph<float>&, Var);
template Var LayerNorm::forward<double>(Graph<double>&, Var);
template Var TransformerBlock::forward<float>(Graph<float>&, Var, bool);
template Var TransformerBlock::forward<double>(Graph<double>&, Var, bool);

}  // namespace exvqa
