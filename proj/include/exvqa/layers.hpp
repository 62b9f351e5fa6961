#pragma once

// Building blocks shared by the encoders, the fusion MLPs and the decoder.

#include <string>

#include "exvqa/graph.hpp"
#include "exvqa/params.hpp"

namespace exvqa {

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [1 x out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  template <class T>
  Var forward(Graph<T>& g, Var x);
  void collect(const std::string& prefix, ParamList& out);
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d);

  template <class T>
  Var forward(Graph<T>& g, Var x);
  void collect(const std::string& prefix, ParamList& out);
};

/// Pre-norm transformer block: x + MHA(LN(x)), then x + FFN(LN(x)).
struct TransformerBlock {
  LayerNorm ln_attn, ln_ffn;
  Linear query, key, value, proj;
  Linear ffn_in, ffn_out;
  std::size_t heads = 1;

  TransformerBlock() = default;
  TransformerBlock(std::size_t d, std::size_t heads, std::size_t ffn_hidden, Rng& rng);

  /// x is [tokens x d]. With `causal`, token t only attends to tokens <= t.
  template <class T>
  Var forward(Graph<T>& g, Var x, bool causal);
  void collect(const std::string& prefix, ParamList& out);
};

}  // namespace exvqa
