#include "exvqa/pipeline.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "exvqa/error.hpp"
#include "exvqa/ops.hpp"

namespace exvqa {

EncoderConfig encoder_config(const RunConfig& cfg) {
  return EncoderConfig{cfg.d, cfg.enc_layers, cfg.enc_heads, cfg.enc_max_len, cfg.ffn_hidden};
}

DecoderConfig decoder_config(const RunConfig& cfg) {
  return DecoderConfig{cfg.d, cfg.dec_layers, cfg.dec_heads, cfg.ffn_hidden, cfg.dec_max_positions};
}

namespace {
std::size_t patch_dim(const RunConfig& cfg) {
  const std::size_t px = cfg.image_size / cfg.grid;
  return px * px * 3;
}
}  // namespace

VqaModel::VqaModel(const RunConfig& cfg, std::size_t vocab_size, Rng& rng)
    : vision(EncoderStack::Input::kPatches, patch_dim(cfg), encoder_config(cfg), rng),
      language(EncoderStack::Input::kTokens, vocab_size, encoder_config(cfg), rng),
      dual(vocab_size, encoder_config(cfg), rng),
      fusion(cfg.d, cfg.fusion_hidden, rng),
      decoder(vocab_size, decoder_config(cfg), rng) {}

ParamList VqaModel::trainable() {
  ParamList out;
  vision.collect("ev", out);
  language.collect("el", out);
  fusion.collect(out);
  decoder.collect("dec", out);
  return out;
}

ParamList VqaModel::params() {
  ParamList out = trainable();
  dual.collect(out);
  return out;
}

std::vector<Slot> ablated_slots(const RunConfig& cfg) {
  std::vector<Slot> out;
  if (cfg.no_captions) out.push_back(Slot::kCaption);
  if (cfg.no_knowledge) out.push_back(Slot::kKnowledge);
  return out;
}

std::vector<PreparedInstance> prepare(std::span<const data::Instance> instances, VqaModel& model,
                                      const text::Vocabulary& vocab, const RunConfig& cfg,
                                      const KnowledgeContext& knowledge) {
  std::unordered_map<std::string, const retrieval::KnowledgeItem*> by_id;
  for (const auto& item : knowledge.base) by_id.emplace(item.id, &item);
  if (knowledge.index && !cfg.no_knowledge) {
    if (knowledge.index->base_fingerprint() != retrieval::knowledge_fingerprint(knowledge.base))
      throw StaleIndexError("index was built from a different knowledge base; rebuild it");
  }
  retrieval::RetrievalCache local_cache;
  retrieval::RetrievalCache& cache = knowledge.cache ? *knowledge.cache : local_cache;

  std::vector<PreparedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    PreparedInstance p;
    p.id = inst.id;
    const Tensor image = data::load_image(inst.image, cfg.image_size);
    p.patches = patchify(image, cfg.grid);
    p.flipped = patchify(flip_horizontal(image), cfg.grid);
    for (const auto& c : inst.captions) p.captions.push_back(text::encode(c, vocab));
    if (!cfg.no_knowledge) {
      if (!knowledge.index) throw ConfigError("a knowledge index is required unless no_knowledge is set");
      p.knowledge_hits =
          retrieval::retrieve_for_instance(inst, *knowledge.index, model.dual, vocab, cfg.knowledge, cache);
      for (const auto& h : p.knowledge_hits) {
        auto it = by_id.find(h.id);
        if (it == by_id.end()) throw StaleIndexError("index item '" + h.id + "' is not in the knowledge base");
        p.knowledge.push_back(text::encode(it->second->text, vocab));
      }
    }
    p.example = make_example(inst.id, inst.question, inst.target(), vocab);
    p.ground_truth = inst.ground_truth();
    out.push_back(std::move(p));
  }
  return out;
}

template <class T>
JointVector joint_vector(Graph<T>& g, VqaModel& model, const PreparedInstance& p, bool flipped,
                         std::span<const Slot> zeroed) {
  const auto off = [&](Slot s) { return std::find(zeroed.begin(), zeroed.end(), s) != zeroed.end(); };
  const auto zero = [&](Modality m) {
    return ModalityFeature{g.constant(BasicTensor<T>::zeros({1, model.fusion_dim()})), m};
  };
  const ModalityFeature f_i = encode_image(g, flipped ? p.flipped : p.patches, model.vision);
  const ModalityFeature f_c = off(Slot::kCaption) ? zero(Modality::kCaption)
                                                  : caption_features(g, std::span(p.captions), model.language);
  const ModalityFeature f_k = off(Slot::kKnowledge) ? zero(Modality::kKnowledge)
                                                    : knowledge_features(g, std::span(p.knowledge), model.language);
  return model.fusion.fuse(g, f_c, f_k, f_i, zeroed);
}

template <class T>
Var instance_loss(Graph<T>& g, VqaModel& model, const PreparedInstance& p, bool flipped, const RunConfig& cfg) {
  const auto zeroed = ablated_slots(cfg);
  const JointVector fj = joint_vector(g, model, p, flipped, zeroed);
  return decoder_forward(g, model.decoder, fj, p.example, cfg.supervise_question);
}

template JointVector joint_vector<float>(Graph<float>&, VqaModel&, const PreparedInstance&, bool, std::span<const Slot>);
template JointVector joint_vector<double>(Graph<double>&, VqaModel&, const PreparedInstance&, bool,
                                          std::span<const Slot>);
template Var instance_loss<float>(Graph<float>&, VqaModel&, const PreparedInstance&, bool, const RunConfig&);
template Var instance_loss<double>(Graph<double>&, VqaModel&, const PreparedInstance&, bool, const RunConfig&);

namespace {

/// Uniform double in [0, 1) from the top 53 bits.
double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

Trainer::Trainer(VqaModel& model, const RunConfig& cfg, Rng& rng, std::size_t total_steps)
    : model_(model),
      cfg_(cfg),
      rng_(rng),
      optimizer_(model.trainable(), LrSchedule{cfg.lr_start, cfg.lr_end, std::max<std::size_t>(1, total_steps)}) {}

double Trainer::step(std::span<const PreparedInstance* const> batch) {
  if (batch.empty()) throw ContractError("empty training batch");
  optimizer_.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const PreparedInstance* p : batch) {
    const bool flip = uniform01(rng_) < cfg_.flip_prob;
    Graph<float> g;
    const Var loss = instance_loss(g, model_, *p, flip, cfg_);
    total += g.value(loss)[0];
    g.backward(ops::scale(g, loss, inv));
  }
  optimizer_.step();
  return total * inv;
}

std::size_t planned_steps(const RunConfig& cfg, std::size_t n) {
  if (cfg.max_steps > 0) return cfg.max_steps;
  return cfg.epochs * ((n + cfg.batch_size - 1) / cfg.batch_size);
}

TrainLog fit(VqaModel& model, std::span<const PreparedInstance> data, const RunConfig& cfg, Rng& rng,
             const std::function<void(std::size_t, double)>& on_step) {
  if (data.empty()) throw DataError("no training instances");
  const std::size_t total = planned_steps(cfg, data.size());
  Trainer trainer(model, cfg, rng, total);
  TrainLog log;
  std::vector<std::size_t> order(data.size());
  while (trainer.steps_taken() < total) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size() && trainer.steps_taken() < total; start += cfg.batch_size) {
      std::vector<const PreparedInstance*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(&data[order[i]]);
      const double loss = trainer.step(batch);
      log.step_losses.push_back(loss);
      epoch_sum += loss;
      ++epoch_steps;
      if (on_step) on_step(trainer.steps_taken(), loss);
    }
    log.epoch_losses.push_back(epoch_sum / static_cast<double>(epoch_steps));
  }
  return log;
}

double mean_loss(VqaModel& model, std::span<const PreparedInstance> data, const RunConfig& cfg) {
  double sum = 0.0;
  for (const auto& p : data) {
    Graph<float> g(false);
    sum += g.value(instance_loss(g, model, p, false, cfg))[0];
  }
  return sum / static_cast<double>(data.size());
}

std::vector<PredictionResult> predict(VqaModel& model, std::span<const PreparedInstance> data,
                                      const RunConfig& cfg, const text::Vocabulary& vocab) {
  const auto zeroed = ablated_slots(cfg);
  DecodeOptions opt;
  opt.mode = cfg.beam > 1 ? DecodeMode::kBeam : DecodeMode::kGreedy;
  opt.beam = cfg.beam;
  opt.max_len = cfg.max_len;
  std::vector<PredictionResult> out;
  for (const auto& p : data) {
    Graph<float> g(false);
    const Tensor prefix = g.value(joint_vector(g, model, p, false, zeroed).tokens);
    PredictionResult r;
    r.output = generate(model.decoder, prefix, p.example.question(), opt, vocab);
    r.prediction = {p.id, r.output.raw, r.output.answer, r.output.explanation};
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> vocabulary_corpus(std::span<const data::Instance> instances,
                                           std::span<const retrieval::KnowledgeItem> base) {
  std::vector<std::string> out;
  for (const auto& inst : instances) {
    out.push_back(inst.question);
    out.push_back(inst.answer);
    out.push_back(inst.explanation);
    for (const auto& s : inst.captions) out.push_back(s);
    for (const auto& s : inst.answers) out.push_back(s);
    for (const auto& s : inst.explanations) out.push_back(s);
  }
  for (const auto& item : base) out.push_back(item.text);
  return out;
}

std::vector<data::Instance> select_split(std::span<const data::Instance> instances, const RunConfig& cfg) {
  if (cfg.split == "all") return {instances.begin(), instances.end()};
  const auto split = data::split_dataset(instances, {cfg.val_ratio, cfg.test_ratio}, cfg.seed);
  const auto& ids = cfg.split == "train" ? split.train : cfg.split == "val" ? split.val : split.test;
  const std::unordered_set<std::string> keep(ids.begin(), ids.end());
  std::vector<data::Instance> out;
  for (const auto& inst : instances)
    if (keep.count(inst.id)) out.push_back(inst);
  if (out.empty()) throw DataError("split '" + cfg.split + "' is empty");
  return out;
}

}  // namespace exvqa
