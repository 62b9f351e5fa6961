#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "exvqa/encoders.hpp"
#include "exvqa/layers.hpp"
#include "exvqa/text.hpp"

namespace exvqa {

/// Three affine layers with GELU between: d -> hidden -> hidden -> d.
class FusionMLP {
 public:
  static constexpr std::size_t kLayers = 3;

  FusionMLP(std::size_t d, std::size_t hidden, Rng& rng);

  template <class T>
  Var forward(Graph<T>& g, Var x);
  void collect(const std::string& prefix, ParamList& out);
  std::size_t hidden() const noexcept { return layers_[0].weight.cols(); }

 private:
  std::array<Linear, kLayers> layers_;
};

/// Slot order of the joint vector.
enum class Slot : std::size_t { kCaption = 0, kKnowledge = 1, kImage = 2 };

/// Fused prefix tokens <g_C(f^C), g_K(f^K), g_I(f^I)>.
struct JointVector {
  std::array<Var, 3> slots;  // each [1 x d]
  Var tokens;                // [3 x d], rows in slot order
};

/// The three fusion MLPs.
class Fusion {
 public:
  Fusion(std::size_t d, std::size_t hidden, Rng& rng);

  /// Each feature's tag must match its slot; throws ContractError otherwise.
  /// A slot listed in `zeroed` is replaced by a zero vector (ablation).
  template <class T>
  JointVector fuse(Graph<T>& g, const ModalityFeature& f_c, const ModalityFeature& f_k, const ModalityFeature& f_i,
                   std::span<const Slot> zeroed = {});
  void collect(ParamList& out);

  FusionMLP& mlp(Slot s) noexcept { return mlps_[static_cast<std::size_t>(s)]; }

 private:
  std::size_t d_;
  std::array<FusionMLP, 3> mlps_;  // g_C, g_K, g_I
};

struct DecoderConfig {
  std::size_t d = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 512;
  std::size_t max_positions = 128;
};

/// One teacher-forcing example: BOS, question, answer, BECAUSE, explanation,
/// EOS, with the question span known.
struct DecoderExample {
  std::string id;
  std::vector<text::TokenId> sequence;
  std::size_t question_len = 0;

  std::span<const text::TokenId> question() const {
    return std::span<const text::TokenId>(sequence).subspan(1, question_len);
  }
};

/// Tokenizes "{question} {answer} because {explanation}" and wraps it in
/// BOS/EOS. Throws DataError naming `id` when no BECAUSE follows the question.
DecoderExample make_example(std::string id, std::string_view question, std::string_view answer_and_explanation,
                            const text::Vocabulary& vocab);
/// Same, from already tokenized parts; validates the BECAUSE boundary.
DecoderExample make_example(std::string id, std::span<const text::TokenId> question,
                            std::span<const text::TokenId> target);

/// Input rows and next-token labels for teacher forcing. Labels of positions
/// that would predict question tokens are `ignore` unless `supervise_question`.
struct TeacherForcing {
  std::vector<text::TokenId> inputs;
  std::vector<text::TokenId> labels;
};
inline constexpr text::TokenId kIgnoreLabel = -1;
TeacherForcing teacher_forcing(const DecoderExample& ex, bool supervise_question = false);

struct GeneratedOutput {
  std::vector<text::TokenId> question;
  std::vector<text::TokenId> generated;  // without the terminating EOS
  std::vector<double> log_probs;         // one per generated token (and EOS when emitted)
  std::string raw;                       // decode(question + generated)
  std::string answer;
  std::string explanation;
  bool has_because = false;
  bool truncated = false;  // stopped at max_len without EOS
};

enum class DecodeMode { kGreedy, kBeam };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kGreedy;
  std::size_t beam = 4;  // width, used in kBeam mode
  std::size_t max_len = 40;
};

/// Causal transformer decoder over [3 prefix slots | BOS question | target],
/// token embeddings tied with the output projection.
class DecoderModel {
 public:
  DecoderModel(std::size_t vocab_size, const DecoderConfig& config, Rng& rng);

  /// Final hidden states [n x d] for prefix rows followed by `ids`.
  template <class T>
  Var hidden(Graph<T>& g, const JointVector& fj, std::span<const text::TokenId> ids);
  /// Logits [rows x V] for the given hidden rows.
  template <class T>
  Var logits(Graph<T>& g, Var hidden_rows);
  /// Mean cross-entropy over non-ignored labels; `labels` align with `inputs`.
  template <class T>
  Var sequence_loss(Graph<T>& g, const JointVector& fj, std::span<const text::TokenId> inputs,
                    std::span<const text::TokenId> labels);
  /// Logits for every input row after the prefix, [inputs x V].
  template <class T>
  Var token_logits(Graph<T>& g, const JointVector& fj, std::span<const text::TokenId> inputs);

  void collect(const std::string& prefix, ParamList& out);
  std::size_t vocab_size() const noexcept { return token_table_.rows(); }
  std::size_t dim() const noexcept { return config_.d; }
  const DecoderConfig& config() const noexcept { return config_; }

 private:
  DecoderConfig config_;
  Tensor token_table_;  // [V x d]
  Tensor positions_;    // [max_positions x d]
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_norm_;
};

/// Teacher-forced loss with the question span masked.
template <class T>
Var decoder_forward(Graph<T>& g, DecoderModel& decoder, const JointVector& fj, const DecoderExample& ex,
                    bool supervise_question = false);

/// Autoregressive decode after the question, conditioned on the fused prefix
/// values `fj` [3 x d]. Greedy picks the lowest id among equal maxima; beam
/// search returns the best finished hypothesis (ties: shorter, then
/// lexicographically smaller ids).
GeneratedOutput generate(DecoderModel& decoder, const Tensor& fj, std::span<const text::TokenId> question,
                         const DecodeOptions& options, const text::Vocabulary& vocab);

struct AnswerExplanation {
  std::string answer;
  std::string explanation;
  bool has_because = false;
};

/// Strips the longest prefix of W that matches a prefix of Q token-wise, then
/// splits at the first standalone "because".
AnswerExplanation split_answer_explanation(std::string_view w, std::string_view question);
AnswerExplanation split_answer_explanation(std::span<const text::TokenId> w, std::span<const text::TokenId> question,
                                           const text::Vocabulary& vocab);

}  // namespace exvqa
