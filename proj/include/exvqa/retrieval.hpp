#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exvqa/dataset.hpp"
#include "exvqa/encoders.hpp"
#include "exvqa/text.hpp"

namespace exvqa::retrieval {

struct KnowledgeItem {
  std::string id;
  std::string text;  // normalized
};

/// Knowledge base JSON-lines: {"id": string, "text": string} per line.
std::vector<KnowledgeItem> load_knowledge(const std::filesystem::path& path);
std::vector<KnowledgeItem> parse_knowledge(std::string_view text);
/// Hash of the base contents (ids and texts, in order).
std::uint64_t knowledge_fingerprint(std::span<const KnowledgeItem> base);

/// Query encoder E_Q and passage encoder E_P. The fingerprint covers both
/// stacks' parameters and is cached; call invalidate() after changing them.
class DualEncoder {
 public:
  DualEncoder(std::size_t vocab_size, const EncoderConfig& config, Rng& rng);

  EncoderStack& query() noexcept { return query_; }
  EncoderStack& passage() noexcept { return passage_; }
  void collect(ParamList& out);
  std::uint64_t fingerprint();
  void invalidate() noexcept { fingerprint_.reset(); }

 private:
  EncoderStack query_;
  EncoderStack passage_;
  std::optional<std::uint64_t> fingerprint_;
};

/// Immutable inner-product search structure.
class KnowledgeIndex {
 public:
  /// `embeddings` is [n x d] with finite entries, one row per id.
  KnowledgeIndex(std::vector<std::string> ids, Tensor embeddings, std::uint64_t encoder_fingerprint,
                 std::uint64_t base_fingerprint);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return embeddings_.cols(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Tensor& embeddings() const noexcept { return embeddings_; }
  std::uint64_t encoder_fingerprint() const noexcept { return encoder_fp_; }
  std::uint64_t base_fingerprint() const noexcept { return base_fp_; }
  /// Combined build fingerprint (encoder weights + base contents).
  std::uint64_t fingerprint() const noexcept;
  /// Hash of the stored rows; stable for the index's lifetime.
  std::uint64_t content_checksum() const;

  /// Inner products of `q` [d] with every row, in row order.
  std::vector<float> scores(std::span<const float> q) const;

  /// A non-empty `config_json` is stored alongside as "meta.config".
  void save(const std::filesystem::path& path, std::string_view config_json = {}) const;
  static KnowledgeIndex load(const std::filesystem::path& path);

 private:
  std::vector<std::string> ids_;
  Tensor embeddings_;  // [n x d]
  Tensor transposed_;  // [d x n], feeds the gemm kernel
  std::uint64_t encoder_fp_;
  std::uint64_t base_fp_;
};

struct Hit {
  std::size_t row;
  std::string id;
  float score;
};

/// Encodes every passage with E_P. Throws DataError for an empty base.
KnowledgeIndex embed_passages(std::span<const KnowledgeItem> base, DualEncoder& encoders,
                              const text::Vocabulary& vocab);

/// Sum of per-caption E_Q encodings. Throws DataError for an empty list.
std::vector<float> embed_query(std::span<const std::string> captions, DualEncoder& encoders,
                               const text::Vocabulary& vocab);

/// Exact top-min(p, n) by descending score, ties by ascending id.
std::vector<Hit> search_topk(const KnowledgeIndex& index, std::span<const float> q, std::size_t p);

/// Per (instance id, index fingerprint) memo of retrieval results.
class RetrievalCache {
 public:
  const std::vector<Hit>* find(const std::string& instance_id, std::uint64_t fingerprint, std::size_t p) const;
  void store(const std::string& instance_id, std::uint64_t fingerprint, std::size_t p, std::vector<Hit> hits);
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t hits() const noexcept { return hits_; }

 private:
  std::map<std::tuple<std::string, std::uint64_t, std::size_t>, std::vector<Hit>> entries_;
  mutable std::size_t hits_ = 0;
};

/// embed_query then search_topk, memoized in `cache`. Throws StaleIndexError
/// when the index was built with different encoder weights.
std::vector<Hit> retrieve_for_instance(const data::Instance& inst, const KnowledgeIndex& index,
                                       DualEncoder& encoders, const text::Vocabulary& vocab, std::size_t p,
                                       RetrievalCache& cache);

}  // namespace exvqa::retrieval
