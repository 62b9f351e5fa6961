#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace exvqa {

/// Every run parameter. Defaults describe the full-size model; the JSON form
/// uses the same flat key names as the fields.
struct RunConfig {
  // model
  std::size_t d = 128;
  std::size_t image_size = 224;
  std::size_t grid = 7;
  std::size_t enc_layers = 2;
  std::size_t enc_heads = 4;
  std::size_t enc_max_len = 64;
  std::size_t dec_layers = 2;
  std::size_t dec_heads = 4;
  std::size_t dec_max_positions = 128;
  std::size_t ffn_hidden = 512;
  std::size_t fusion_hidden = 128;
  // data and retrieval
  std::size_t captions = 5;  // L
  std::size_t knowledge = 3;  // P
  std::size_t min_freq = 1;
  std::size_t val_ratio = 3;
  std::size_t test_ratio = 4;
  std::string split = "all";  // all | train | val | test
  // training
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::size_t max_steps = 0;  // 0: epochs decide
  double lr_start = 2e-5;
  double lr_end = 1e-5;
  double flip_prob = 0.5;
  bool supervise_question = false;
  bool no_captions = false;
  bool no_knowledge = false;
  std::uint64_t seed = 0;
  // decoding and evaluation
  std::size_t max_len = 40;
  std::size_t beam = 1;  // 1: greedy
  std::string accuracy = "exact";  // exact | vqa_soft
  // paths
  std::string dataset;
  std::string knowledge_base;
  std::string vocab;
  std::string index;
  std::string checkpoint;
  std::string predictions;
  std::string report;
  std::string retrieval_cache;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// Flat JSON of every field. Without paths the echo depends only on the
  /// run's settings, so artifacts written to different places stay identical.
  std::string to_json(bool include_paths = true) const;
  /// Sets one field from its textual form ("true"/"false" for booleans).
  void set(std::string_view key, std::string_view value);
  /// Copies the model-shape fields and ablation flags from `other`.
  void adopt_model(const RunConfig& other);
  /// Unknown keys and type mismatches throw ConfigError.
  static RunConfig from_json(std::string_view text);
  /// Applies the keys present in `text` on top of this config.
  void merge_json(std::string_view text);
  /// The model-shape subset that must agree between a checkpoint and a run.
  std::string model_signature() const;
};

enum class FieldKind { kBool, kUnsigned, kDouble, kString };

struct FieldInfo {
  std::string name;
  FieldKind kind;
  bool is_path;
};

/// Every RunConfig key, sorted by name.
std::vector<FieldInfo> config_fields();

/// Small settings used by the synthetic memorization set.
RunConfig toy_config();

}  // namespace exvqa
