#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "exvqa/layers.hpp"
#include "exvqa/text.hpp"

namespace exvqa {

enum class Modality { kImage, kCaption, kKnowledge };

std::string_view modality_name(Modality m);

/// Image cut into grid x grid non-overlapping square patches, row-major over
/// the grid, each patch flattened channel-last.
struct PatchGrid {
  std::size_t grid = 0;
  std::size_t patch_px = 0;
  Tensor patches;  // [grid^2 x patch_px^2 * 3]
};

/// `image` is [H x W x 3] with values in [0, 1] and H == W.
/// Throws ConfigError when the side is not divisible by `grid`.
PatchGrid patchify(const Tensor& image, std::size_t grid);

/// Mirrors an [H x W x 3] image left-to-right.
Tensor flip_horizontal(const Tensor& image);

struct EncoderConfig {
  std::size_t d = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t max_len = 64;
  std::size_t ffn_hidden = 512;
};

/// Transformer encoder with mean pooling. The same stack serves as vision
/// encoder (patch projection input) and as language, query and passage
/// encoder (token embedding input).
class EncoderStack {
 public:
  enum class Input { kPatches, kTokens };

  /// `input_width` is the flattened patch size for kPatches and the
  /// vocabulary size for kTokens.
  EncoderStack(Input input, std::size_t input_width, const EncoderConfig& config, Rng& rng);

  /// Contextualized, final-norm token states [n x d] before pooling.
  template <class T>
  Var forward_states(Graph<T>& g, Var embedded);
  /// Token embedding rows [n x d] (no positions yet).
  template <class T>
  Var embed(Graph<T>& g, std::span<const text::TokenId> ids);
  /// [n x patch_dim] -> [1 x d].
  template <class T>
  Var forward_patches(Graph<T>& g, const Tensor& patches);
  /// Token ids -> [1 x d]. Caller guarantees 1 <= ids.size() <= max_len.
  template <class T>
  Var forward_tokens(Graph<T>& g, std::span<const text::TokenId> ids);

  void collect(const std::string& prefix, ParamList& out);

  Input input() const noexcept { return input_; }
  std::size_t dim() const noexcept { return config_.d; }
  std::size_t max_len() const noexcept { return config_.max_len; }
  const EncoderConfig& config() const noexcept { return config_; }

 private:
  Input input_;
  EncoderConfig config_;
  Tensor token_table_;  // kTokens: [vocab x d]
  Linear patch_proj_;   // kPatches: [patch_dim x d]
  Tensor positions_;    // [max_len x d]
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_norm_;
};

/// A pooled feature vector [1 x d] on a graph, tagged with its source.
struct ModalityFeature {
  Var vec;
  Modality tag;
};

/// f^I: mean-pooled final-layer patch states.
template <class T>
ModalityFeature encode_image(Graph<T>& g, const PatchGrid& grid, EncoderStack& vision);

/// Mean-pooled final-layer token states. Sequences beyond max_len are
/// truncated with a warning; an empty sequence is encoded as [BOS, EOS].
template <class T>
ModalityFeature encode_text(Graph<T>& g, std::span<const text::TokenId> ids, EncoderStack& language,
                            Modality tag = Modality::kCaption);

/// f^C: sum of per-caption encodings. Throws DataError for an empty set.
template <class T>
ModalityFeature caption_features(Graph<T>& g, std::span<const text::TokenSequence> captions,
                                 EncoderStack& language);

/// f^K: sum of per-item encodings; an empty set yields a zero vector and a
/// warning.
template <class T>
ModalityFeature knowledge_features(Graph<T>& g, std::span<const text::TokenSequence> items,
                                   EncoderStack& language);

/// Sum of per-text encodings in a canonical (sorted by token ids) order so
/// the result does not depend on input order.
template <class T>
Var sum_of_encodings(Graph<T>& g, std::span<const text::TokenSequence> texts, EncoderStack& encoder);

}  // namespace exvqa
