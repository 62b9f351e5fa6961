#include "exvqa/fusion_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "exvqa/error.hpp"
#include "exvqa/ops.hpp"

namespace exvqa {

using text::TokenId;

FusionMLP::FusionMLP(std::size_t d, std::size_t hidden, Rng& rng)
    : layers_{Linear(d, hidden, rng), Linear(hidden, hidden, rng), Linear(hidden, d, rng)} {}

template <class T>
Var FusionMLP::forward(Graph<T>& g, Var x) {
  x = ops::gelu(g, layers_[0].forward(g, x));
  x = ops::gelu(g, layers_[1].forward(g, x));
  return layers_[2].forward(g, x);
}

void FusionMLP::collect(const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < kLayers; ++i) layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
}

Fusion::Fusion(std::size_t d, std::size_t hidden, Rng& rng)
    : d_(d), mlps_{FusionMLP(d, hidden, rng), FusionMLP(d, hidden, rng), FusionMLP(d, hidden, rng)} {}

void Fusion::collect(ParamList& out) {
  mlps_[0].collect("g_c", out);
  mlps_[1].collect("g_k", out);
  mlps_[2].collect("g_i", out);
}

template <class T>
JointVector Fusion::fuse(Graph<T>& g, const ModalityFeature& f_c, const ModalityFeature& f_k,
                         const ModalityFeature& f_i, std::span<const Slot> zeroed) {
  const std::array<const ModalityFeature*, 3> in{&f_c, &f_k, &f_i};
  constexpr std::array<Modality, 3> expected{Modality::kCaption, Modality::kKnowledge, Modality::kImage};
  JointVector out;
  for (std::size_t s = 0; s < 3; ++s) {
    if (in[s]->tag != expected[s])
      throw ContractError("fuse: slot " + std::to_string(s) + " expects a " + std::string(modality_name(expected[s])) +
                          " feature, got " + std::string(modality_name(in[s]->tag)));
    const Shape& dims = g.dims(in[s]->vec);
    if (dims != Shape{1, d_})
      throw DimensionError("fuse: " + std::string(modality_name(expected[s])) + " feature has shape " +
                           shape_str(dims) + ", expected [1x" + std::to_string(d_) + "]");
    const bool off = std::find(zeroed.begin(), zeroed.end(), static_cast<Slot>(s)) != zeroed.end();
    out.slots[s] = off ? g.constant(BasicTensor<T>::zeros({1, d_})) : mlps_[s].forward(g, in[s]->vec);
  }
  out.tokens = ops::concat_rows<T>(g, out.slots);
  return out;
}

namespace {

std::size_t find_because(std::span<const TokenId> seq, std::size_t from) {
  for (std::size_t i = from; i < seq.size(); ++i)
    if (seq[i] == text::kBecause) return i;
  return seq.size();
}

}  // namespace

DecoderExample make_example(std::string id, std::span<const TokenId> question, std::span<const TokenId> target) {
  DecoderExample ex;
  ex.id = std::move(id);
  ex.sequence.push_back(text::kBos);
  ex.sequence.insert(ex.sequence.end(), question.begin(), question.end());
  ex.sequence.insert(ex.sequence.end(), target.begin(), target.end());
  ex.sequence.push_back(text::kEos);
  ex.question_len = question.size();
  const std::size_t b = find_because(ex.sequence, 1 + question.size());
  if (b == ex.sequence.size())
    throw DataError("instance '" + ex.id + "': target has no 'because' boundary after the question");
  if (b == 1 + question.size()) throw DataError("instance '" + ex.id + "': empty answer before 'because'");
  return ex;
}

DecoderExample make_example(std::string id, std::string_view question, std::string_view answer_and_explanation,
                            const text::Vocabulary& vocab) {
  const auto q = text::encode(question, vocab);
  const auto t = text::encode(answer_and_explanation, vocab);
  return make_example(std::move(id), std::span<const TokenId>(q.ids), std::span<const TokenId>(t.ids));
}

TeacherForcing teacher_forcing(const DecoderExample& ex, bool supervise_question) {
  TeacherForcing tf;
  const auto& s = ex.sequence;
  tf.inputs.assign(s.begin(), s.end() - 1);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const bool question_target = i <= ex.question_len;
    tf.labels.push_back(question_target && !supervise_question ? kIgnoreLabel : s[i]);
  }
  return tf;
}

DecoderModel::DecoderModel(std::size_t vocab_size, const DecoderConfig& config, Rng& rng) : config_(config) {
  if (config.d == 0 || config.layers == 0 || config.max_positions < 5)
    throw ConfigError("decoder width, depth and positional capacity must be positive");
  token_table_ = normal_param({vocab_size, config.d}, 0.02, rng);
  positions_ = normal_param({config.max_positions, config.d}, 0.02, rng);
  for (std::size_t i = 0; i < config.layers; ++i) blocks_.emplace_back(config.d, config.heads, config.ffn_hidden, rng);
  final_norm_ = LayerNorm(config.d);
}

void DecoderModel::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".tokens", &token_table_});
  out.push_back({prefix + ".positions", &positions_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  final_norm_.collect(prefix + ".final_norm", out);
}

template <class T>
Var DecoderModel::hidden(Graph<T>& g, const JointVector& fj, std::span<const TokenId> ids) {
  const std::size_t n = 3 + ids.size();
  if (n > config_.max_positions)
    throw DimensionError("decoder input of " + std::to_string(n) + " positions exceeds capacity " +
                         std::to_string(config_.max_positions));
  if (g.dims(fj.tokens) != Shape{3, config_.d}) throw DimensionError("joint vector must be [3 x d]");
  Var x = fj.tokens;
  if (!ids.empty()) {
    const Var tok = ops::embedding(g, g.param(token_table_), ids);
    const std::array<Var, 2> parts{fj.tokens, tok};
    x = ops::concat_rows<T>(g, parts);
  }
  x = ops::add(g, x, ops::slice_rows(g, g.param(positions_), 0, n));
  for (auto& block : blocks_) x = block.forward(g, x, /*causal=*/true);
  return final_norm_.forward(g, x);
}

template <class T>
Var DecoderModel::logits(Graph<T>& g, Var hidden_rows) {
  return ops::matmul(g, hidden_rows, ops::transpose(g, g.param(token_table_)));
}

template <class T>
Var DecoderModel::token_logits(Graph<T>& g, const JointVector& fj, std::span<const TokenId> inputs) {
  const Var h = hidden(g, fj, inputs);
  return logits(g, ops::slice_rows(g, h, 3, inputs.size()));
}

template <class T>
Var DecoderModel::sequence_loss(Graph<T>& g, const JointVector& fj, std::span<const TokenId> inputs,
                                std::span<const TokenId> labels) {
  if (inputs.size() != labels.size() || inputs.empty())
    throw DimensionError("teacher forcing needs one label per input token");
  return ops::cross_entropy(g, token_logits(g, fj, inputs), labels, kIgnoreLabel);
}

template <class T>
Var decoder_forward(Graph<T>& g, DecoderModel& decoder, const JointVector& fj, const DecoderExample& ex,
                    bool supervise_question) {
  const auto tf = teacher_forcing(ex, supervise_question);
  return decoder.sequence_loss(g, fj, std::span<const TokenId>(tf.inputs), std::span<const TokenId>(tf.labels));
}

namespace {

/// log-softmax of one logits row in double.
std::vector<double> log_softmax(std::span<const float> row) {
  double mx = -INFINITY;
  for (float v : row) mx = std::max(mx, static_cast<double>(v));
  double z = 0.0;
  for (float v : row) z += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = static_cast<double>(row[i]) - lse;
  return out;
}

std::vector<double> next_log_probs(DecoderModel& dec, const Tensor& prefix, std::span<const TokenId> ids) {
  Graph<float> g(false);
  JointVector fj;
  fj.tokens = g.constant(prefix);
  const Var h = dec.hidden(g, fj, ids);
  const Var last = ops::slice_rows(g, h, 3 + ids.size() - 1, 1);
  const auto& row = g.value(dec.logits(g, last));
  return log_softmax(row.data());
}

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated, excluding EOS
  std::vector<double> log_probs;
  double score = 0.0;
  bool finished = false;
};

/// Final ranking: higher log-prob, then shorter, then lexicographic ids.
bool better_final(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

}  // namespace

GeneratedOutput generate(DecoderModel& decoder, const Tensor& fj, std::span<const TokenId> question, const DecodeOptions& options,
                         const text::Vocabulary& vocab) {
  if (options.mode == DecodeMode::kBeam && options.beam == 0) throw ConfigError("beam width must be at least 1");
  if (fj.dims() != Shape{3, decoder.dim()}) throw DimensionError("joint vector must be [3 x d]");
  std::vector<TokenId> prefix{text::kBos};
  prefix.insert(prefix.end(), question.begin(), question.end());
  // Positions left for generated tokens after prefix slots, BOS and question.
  const std::size_t cap = decoder.config().max_positions;
  if (3 + prefix.size() > cap) throw DimensionError("question does not fit the decoder's positional capacity");
  const std::size_t max_len = std::min(options.max_len, cap - 3 - prefix.size() + 1);

  Hypothesis best;
  if (options.mode == DecodeMode::kGreedy) {
    std::vector<TokenId> ids = prefix;
    while (best.tokens.size() < max_len) {
      const auto lp = next_log_probs(decoder, fj, ids);
      const auto tok = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      best.log_probs.push_back(lp[tok]);
      best.score += lp[tok];
      if (tok == text::kEos) {
        best.finished = true;
        break;
      }
      best.tokens.push_back(tok);
      ids.push_back(tok);
    }
  } else {
    const std::size_t k = options.beam;
    std::vector<Hypothesis> beams(1), done;
    for (std::size_t step = 0; step < max_len && !beams.empty(); ++step) {
      // (score, parent, local log-prob, token)
      std::vector<std::tuple<double, std::size_t, double, TokenId>> cand;
      for (std::size_t b = 0; b < beams.size(); ++b) {
        std::vector<TokenId> ids = prefix;
        ids.insert(ids.end(), beams[b].tokens.begin(), beams[b].tokens.end());
        const auto lp = next_log_probs(decoder, fj, ids);
        for (std::size_t t = 0; t < lp.size(); ++t)
          cand.emplace_back(beams[b].score + lp[t], b, lp[t], static_cast<TokenId>(t));
      }
      const std::size_t keep = std::min(k, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                        [](const auto& a, const auto& b) {
                          if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
                          if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
                          if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) > std::get<2>(b);
                          return std::get<3>(a) < std::get<3>(b);
                        });
      std::vector<Hypothesis> next;
      for (std::size_t i = 0; i < keep; ++i) {
        const auto& [score, parent, lp, tok] = cand[i];
        Hypothesis h = beams[parent];
        h.score = score;
        h.log_probs.push_back(lp);
        if (tok == text::kEos) {
          h.finished = true;
          done.push_back(std::move(h));
        } else {
          h.tokens.push_back(tok);
          next.push_back(std::move(h));
        }
      }
      beams = std::move(next);
      if (done.size() >= k) break;
    }
    // Unfinished beams at max_len compete as truncated outputs.
    for (auto& h : beams) done.push_back(std::move(h));
    best = *std::min_element(done.begin(), done.end(), better_final);
  }

  GeneratedOutput out;
  out.question.assign(question.begin(), question.end());
  out.generated = best.tokens;
  out.log_probs = best.log_probs;
  out.truncated = !best.finished;
  std::vector<TokenId> w = out.question;
  w.insert(w.end(), out.generated.begin(), out.generated.end());
  out.raw = text::decode(w, vocab);
  const auto split = split_answer_explanation(w, question, vocab);
  out.answer = split.answer;
  out.explanation = split.explanation;
  out.has_because = split.has_because;
  return out;
}

namespace {

std::string join(std::span<const std::string> toks) {
  std::string s;
  for (const auto& t : toks) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

AnswerExplanation split_tokens_impl(const std::vector<std::string>& w, const std::vector<std::string>& q) {
  std::size_t start = 0;
  while (start < w.size() && start < q.size() && w[start] == q[start]) ++start;
  const std::span<const std::string> rest(w.data() + start, w.size() - start);
  const auto it = std::find(rest.begin(), rest.end(), "because");
  AnswerExplanation out;
  if (it == rest.end()) {
    out.answer = join(rest);
    return out;
  }
  const auto cut = static_cast<std::size_t>(it - rest.begin());
  out.answer = join(rest.first(cut));
  out.explanation = join(rest.subspan(cut + 1));
  out.has_because = true;
  return out;
}

}  // namespace

AnswerExplanation split_answer_explanation(std::string_view w, std::string_view question) {
  return split_tokens_impl(text::split_tokens(w), text::split_tokens(question));
}

AnswerExplanation split_answer_explanation(std::span<const TokenId> w, std::span<const TokenId> question,
                                           const text::Vocabulary& vocab) {
  std::vector<std::string> wt, qt;
  for (TokenId id : w)
    if (id != text::kPad && id != text::kBos && id != text::kEos) wt.push_back(vocab.token(id));
  for (TokenId id : question)
    if (id != text::kPad && id != text::kBos && id != text::kEos) qt.push_back(vocab.token(id));
  return split_tokens_impl(wt, qt);
}

#define EXVQA_INSTANTIATE(T)                                                                                     \
  template Var FusionMLP::forward<T>(Graph<T>&, Var);                                                            \
  template JointVector Fusion::fuse<T>(Graph<T>&, const ModalityFeature&, const ModalityFeature&,                \
                                       const ModalityFeature&, std::span<const Slot>);                           \
  template Var DecoderModel::hidden<T>(Graph<T>&, const JointVector&, std::span<const TokenId>);                 \
  template Var DecoderModel::logits<T>(Graph<T>&, Var);                                                          \
  template Var DecoderModel::token_logits<T>(Graph<T>&, const JointVector&, std::span<const TokenId>);           \
  template Var DecoderModel::sequence_loss<T>(Graph<T>&, const JointVector&, std::span<const TokenId>,           \
                                              std::span<const TokenId>);                                         \
  template Var decoder_forward<T>(Graph<T>&, DecoderModel&, const JointVector&, const DecoderExample&, bool);

EXVQA_INSTANTIATE(float)
EXVQA_INSTANTIATE(double)

#undef EXVQA_INSTANTIATE

}  // namespace exvqa
