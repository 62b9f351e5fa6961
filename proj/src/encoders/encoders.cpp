#include "exvqa/encoders.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "exvqa/ops.hpp"

namespace exvqa {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kImage: return "image";
    case Modality::kCaption: return "caption";
    case Modality::kKnowledge: return "knowledge";
  }
  return "unknown";
}

PatchGrid patchify(const Tensor& image, std::size_t grid) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw DimensionError("patchify expects an [H x W x 3] image, got " + shape_str(image.dims()));
  const std::size_t side = image.dim(0);
  if (image.dim(1) != side) throw DimensionError("patchify expects a square image, got " + shape_str(image.dims()));
  if (grid == 0 || side % grid != 0)
    throw ConfigError("image side " + std::to_string(side) + " is not divisible by grid " + std::to_string(grid));
  for (float v : image.data())
    if (v < 0.0f || v > 1.0f) throw DataError("pixel value outside [0, 1]");
  const std::size_t px = side / grid;
  const std::size_t patch_dim = px * px * 3;
  PatchGrid out{grid, px, Tensor::zeros({grid * grid, patch_dim})};
  for (std::size_t pr = 0; pr < grid; ++pr)
    for (std::size_t pc = 0; pc < grid; ++pc) {
      float* dst = out.patches.data().data() + (pr * grid + pc) * patch_dim;
      for (std::size_t y = 0; y < px; ++y) {
        const float* src = image.data().data() + ((pr * px + y) * side + pc * px) * 3;
        std::copy_n(src, px * 3, dst + y * px * 3);
      }
    }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  Tensor out = image;
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(y * w + x) * c + k] = image[(y * w + (w - 1 - x)) * c + k];
  return out;
}

EncoderStack::EncoderStack(Input input, std::size_t input_width, const EncoderConfig& config, Rng& rng)
    : input_(input), config_(config) {
  if (config.d == 0 || config.layers == 0 || config.max_len == 0)
    throw ConfigError("encoder width, depth and max_len must be positive");
  if (input == Input::kTokens)
    token_table_ = normal_param({input_width, config.d}, 0.02, rng);
  else
    patch_proj_ = Linear(input_width, config.d, rng);
  positions_ = normal_param({config.max_len, config.d}, 0.02, rng);
  for (std::size_t i = 0; i < config.layers; ++i)
    blocks_.emplace_back(config.d, config.heads, config.ffn_hidden, rng);
  final_norm_ = LayerNorm(config.d);
}

template <class T>
Var EncoderStack::forward_states(Graph<T>& g, Var embedded) {
  const std::size_t n = g.dims(embedded)[0];
  if (n > config_.max_len)
    throw DimensionError("sequence of " + std::to_string(n) + " exceeds positional table of " +
                         std::to_string(config_.max_len));
  Var x = ops::add(g, embedded, ops::slice_rows(g, g.param(positions_), 0, n));
  for (auto& block : blocks_) x = block.forward(g, x, /*causal=*/false);
  return final_norm_.forward(g, x);
}

template <class T>
Var EncoderStack::forward_patches(Graph<T>& g, const Tensor& patches) {
  if (input_ != Input::kPatches) throw ContractError("token encoder fed with image patches");
  if (patches.rank() != 2 || patches.dim(1) != patch_proj_.weight.dim(0))
    throw DimensionError("patch tensor " + shape_str(patches.dims()) + " does not match projection " +
                         shape_str(patch_proj_.weight.dims()));
  auto values = BasicTensor<T>::from(patches.dims(), std::vector<T>(patches.data().begin(), patches.data().end()));
  Var x = patch_proj_.forward(g, g.constant(std::move(values)));
  return ops::mean_pool(g, forward_states(g, x));
}

template <class T>
Var EncoderStack::embed(Graph<T>& g, std::span<const text::TokenId> ids) {
  if (input_ != Input::kTokens) throw ContractError("patch encoder fed with tokens");
  return ops::embedding<T>(g, g.param(token_table_), ids);
}

template <class T>
Var EncoderStack::forward_tokens(Graph<T>& g, std::span<const text::TokenId> ids) {
  return ops::mean_pool(g, forward_states(g, embed(g, ids)));
}

void EncoderStack::collect(const std::string& prefix, ParamList& out) {
  if (input_ == Input::kTokens)
    out.push_back({prefix + ".tokens", &token_table_});
  else
    patch_proj_.collect(prefix + ".patch_proj", out);
  out.push_back({prefix + ".positions", &positions_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  final_norm_.collect(prefix + ".final_norm", out);
}

template <class T>
ModalityFeature encode_image(Graph<T>& g, const PatchGrid& grid, EncoderStack& vision) {
  if (grid.patches.dim(0) > vision.max_len())
    throw DimensionError(std::to_string(grid.patches.dim(0)) + " patches exceed the positional table of " +
                         std::to_string(vision.max_len()));
  return {vision.forward_patches(g, grid.patches), Modality::kImage};
}

template <class T>
ModalityFeature encode_text(Graph<T>& g, std::span<const text::TokenId> ids, EncoderStack& language, Modality tag) {
  static const text::TokenId kEmpty[] = {text::kBos, text::kEos};
  if (ids.empty()) ids = kEmpty;
  if (ids.size() > language.max_len()) {
    spdlog::warn("text of {} tokens truncated to {}", ids.size(), language.max_len());
    ids = ids.first(language.max_len());
  }
  return {language.forward_tokens(g, ids), tag};
}

template <class T>
Var sum_of_encodings(Graph<T>& g, std::span<const text::TokenSequence> texts, EncoderStack& encoder) {
  std::vector<const text::TokenSequence*> order;
  for (const auto& t : texts) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->ids < b->ids; });
  std::vector<Var> rows;
  for (auto* t : order) rows.push_back(encode_text(g, std::span<const text::TokenId>(t->ids), encoder).vec);
  if (rows.size() == 1) return rows[0];
  return ops::sum_pool(g, ops::concat_rows<T>(g, rows));
}

template <class T>
ModalityFeature caption_features(Graph<T>& g, std::span<const text::TokenSequence> captions,
                                 EncoderStack& language) {
  if (captions.empty()) throw DataError("caption set is empty");
  return {sum_of_encodings(g, captions, language), Modality::kCaption};
}

template <class T>
ModalityFeature knowledge_features(Graph<T>& g, std::span<const text::TokenSequence> items,
                                   EncoderStack& language) {
  if (items.empty()) {
    spdlog::warn("no knowledge items retrieved; using a zero knowledge feature");
    return {g.constant(BasicTensor<T>::zeros({1, language.dim()})), Modality::kKnowledge};
  }
  return {sum_of_encodings(g, items, language), Modality::kKnowledge};
}

#define EXVQA_INSTANTIATE(T)                                                                                  \
  template Var EncoderStack::forward_states<T>(Graph<T>&, Var);                                               \
  template Var EncoderStack::embed<T>(Graph<T>&, std::span<const text::TokenId>);                             \
  template Var EncoderStack::forward_patches<T>(Graph<T>&, const Tensor&);                                    \
  template Var EncoderStack::forward_tokens<T>(Graph<T>&, std::span<const text::TokenId>);                    \
  template ModalityFeature encode_image<T>(Graph<T>&, const PatchGrid&, EncoderStack&);                       \
  template ModalityFeature encode_text<T>(Graph<T>&, std::span<const text::TokenId>, EncoderStack&, Modality); \
  template Var sum_of_encodings<T>(Graph<T>&, std::span<const text::TokenSequence>, EncoderStack&);           \
  template ModalityFeature caption_features<T>(Graph<T>&, std::span<const text::TokenSequence>, EncoderStack&); \
  template ModalityFeature knowledge_features<T>(Graph<T>&, std::span<const text::TokenSequence>, EncoderStack&);

EXVQA_INSTANTIATE(float)
EXVQA_INSTANTIATE(double)

#undef EXVQA_INSTANTIATE

}  // namespace exvqa
