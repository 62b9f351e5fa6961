#pragma once

// End-to-end model: encoders, retrieval, fusion and decoder, plus data
// preparation, training and prediction over datasets.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exvqa/config.hpp"
#include "exvqa/dataset.hpp"
#include "exvqa/fusion_decoder.hpp"
#include "exvqa/metrics.hpp"
#include "exvqa/optimizer.hpp"
#include "exvqa/retrieval.hpp"

namespace exvqa {

EncoderConfig encoder_config(const RunConfig& cfg);
DecoderConfig decoder_config(const RunConfig& cfg);

/// All networks of one run. Parameters are drawn from `rng` in member order.
class VqaModel {
 public:
  VqaModel(const RunConfig& cfg, std::size_t vocab_size, Rng& rng);

  EncoderStack vision;    // E_I, "ev"
  EncoderStack language;  // E_L for captions and knowledge, "el"
  retrieval::DualEncoder dual;  // E_Q / E_P, "eq" / "ep"
  Fusion fusion;          // g_C, g_K, g_I
  DecoderModel decoder;   // "dec"

  std::size_t fusion_dim() const noexcept { return decoder.dim(); }
  ParamList params();
  /// Everything except the frozen retrieval encoders.
  ParamList trainable();
};

/// An instance with its image patches, token sequences and retrieved
/// knowledge, ready for the model.
struct PreparedInstance {
  std::string id;
  PatchGrid patches;
  PatchGrid flipped;
  std::vector<text::TokenSequence> captions;
  std::vector<text::TokenSequence> knowledge;
  std::vector<retrieval::Hit> knowledge_hits;
  DecoderExample example;
  std::string ground_truth;
};

/// Retrieval context for preparation. With no index, instances get no
/// knowledge (only valid for --no-knowledge runs).
struct KnowledgeContext {
  const retrieval::KnowledgeIndex* index = nullptr;
  std::span<const retrieval::KnowledgeItem> base;
  retrieval::RetrievalCache* cache = nullptr;
};

std::vector<PreparedInstance> prepare(std::span<const data::Instance> instances, VqaModel& model,
                                      const text::Vocabulary& vocab, const RunConfig& cfg,
                                      const KnowledgeContext& knowledge);

/// Slots zeroed by the config's ablation flags.
std::vector<Slot> ablated_slots(const RunConfig& cfg);

/// f^J for one prepared instance on `g`.
template <class T>
JointVector joint_vector(Graph<T>& g, VqaModel& model, const PreparedInstance& p, bool flipped,
                         std::span<const Slot> zeroed);

/// Teacher-forced loss of one instance.
template <class T>
Var instance_loss(Graph<T>& g, VqaModel& model, const PreparedInstance& p, bool flipped, const RunConfig& cfg);

struct TrainLog {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
};

class Trainer {
 public:
  /// `rng` drives shuffling and flips; it is shared with the caller so the
  /// final state can be checkpointed.
  Trainer(VqaModel& model, const RunConfig& cfg, Rng& rng, std::size_t total_steps);

  /// One optimizer step over `batch`; returns the mean instance loss.
  double step(std::span<const PreparedInstance* const> batch);
  std::size_t steps_taken() const noexcept { return optimizer_.step_count(); }
  const AdamOptimizer& optimizer() const noexcept { return optimizer_; }

 private:
  VqaModel& model_;
  const RunConfig& cfg_;
  Rng& rng_;
  AdamOptimizer optimizer_;
};

/// Number of optimizer steps a run over `n` instances takes.
std::size_t planned_steps(const RunConfig& cfg, std::size_t n);

/// Shuffled mini-batch training for planned_steps(); calls `on_step` after
/// each step when given.
TrainLog fit(VqaModel& model, std::span<const PreparedInstance> data, const RunConfig& cfg, Rng& rng,
             const std::function<void(std::size_t step, double loss)>& on_step = {});

/// Mean loss over `data` without updates or flips.
double mean_loss(VqaModel& model, std::span<const PreparedInstance> data, const RunConfig& cfg);

struct PredictionResult {
  metrics::Prediction prediction;
  GeneratedOutput output;
};

std::vector<PredictionResult> predict(VqaModel& model, std::span<const PreparedInstance> data,
                                      const RunConfig& cfg, const text::Vocabulary& vocab);

/// Words of every text field of `instances` and of `base`, for the vocabulary.
std::vector<std::string> vocabulary_corpus(std::span<const data::Instance> instances,
                                           std::span<const retrieval::KnowledgeItem> base);

/// Instances of the split named by cfg.split ("all" keeps everything).
std::vector<data::Instance> select_split(std::span<const data::Instance> instances, const RunConfig& cfg);

}  // namespace exvqa
