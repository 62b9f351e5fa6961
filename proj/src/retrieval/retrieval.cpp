#include "exvqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "exvqa/error.hpp"
#include "exvqa/hash.hpp"
#include "exvqa/kernels.hpp"
#include "exvqa/tensor_file.hpp"

namespace exvqa::retrieval {

using nlohmann::json;

std::vector<KnowledgeItem> parse_knowledge(std::string_view text) {
  std::vector<KnowledgeItem> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string at = "knowledge line " + std::to_string(line_no) + ": ";
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(at + "invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("text"))
      throw DataError(at + "expected an object with \"id\" and \"text\"");
    if (!obj["id"].is_string() || !obj["text"].is_string()) throw DataError(at + "\"id\" and \"text\" must be strings");
    KnowledgeItem item{obj["id"].get<std::string>(), text::normalize(obj["text"].get<std::string>())};
    if (item.id.empty()) throw DataError(at + "empty id");
    if (item.text.empty()) throw DataError(at + "empty text for id '" + item.id + "'");
    if (!seen.insert(item.id).second) throw DataError(at + "duplicate id '" + item.id + "'");
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<KnowledgeItem> load_knowledge(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_knowledge(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::uint64_t knowledge_fingerprint(std::span<const KnowledgeItem> base) {
  Fnv1a64 h;
  const std::uint8_t sep = 0;
  for (const auto& item : base) {
    h.update(item.id);
    h.update(std::span(&sep, 1));
    h.update(item.text);
    h.update(std::span(&sep, 1));
  }
  return h.digest();
}

DualEncoder::DualEncoder(std::size_t vocab_size, const EncoderConfig& config, Rng& rng)
    : query_(EncoderStack::Input::kTokens, vocab_size, config, rng),
      passage_(EncoderStack::Input::kTokens, vocab_size, config, rng) {}

void DualEncoder::collect(ParamList& out) {
  query_.collect("eq", out);
  passage_.collect("ep", out);
}

std::uint64_t DualEncoder::fingerprint() {
  if (!fingerprint_) {
    ParamList params;
    collect(params);
    fingerprint_ = exvqa::fingerprint(params);
  }
  return *fingerprint_;
}

KnowledgeIndex::KnowledgeIndex(std::vector<std::string> ids, Tensor embeddings, std::uint64_t encoder_fingerprint,
                               std::uint64_t base_fingerprint)
    : ids_(std::move(ids)), embeddings_(std::move(embeddings)), encoder_fp_(encoder_fingerprint),
      base_fp_(base_fingerprint) {
  if (embeddings_.rank() != 2) throw DimensionError("index embeddings must be a matrix");
  if (embeddings_.rows() != ids_.size())
    throw DimensionError("index has " + std::to_string(ids_.size()) + " ids but " +
                         std::to_string(embeddings_.rows()) + " rows");
  if (ids_.empty()) throw DataError("knowledge index is empty");
  for (float v : embeddings_.data())
    if (!std::isfinite(v)) throw DataError("knowledge index holds a non-finite embedding");
  std::unordered_set<std::string> seen(ids_.begin(), ids_.end());
  if (seen.size() != ids_.size()) throw DataError("knowledge index ids are not unique");
  embeddings_.set_requires_grad(false);
  const std::size_t n = ids_.size(), d = embeddings_.cols();
  transposed_ = Tensor::zeros({d, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) transposed_[j * n + i] = embeddings_[i * d + j];
}

std::uint64_t KnowledgeIndex::fingerprint() const noexcept {
  Fnv1a64 h;
  const std::uint64_t parts[2] = {encoder_fp_, base_fp_};
  h.update(std::span(reinterpret_cast<const std::uint8_t*>(parts), sizeof parts));
  return h.digest();
}

std::uint64_t KnowledgeIndex::content_checksum() const {
  Fnv1a64 h;
  for (const auto& id : ids_) h.update(id);
  auto data = embeddings_.data();
  h.update(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size() * sizeof(float)));
  return h.digest();
}

std::vector<float> KnowledgeIndex::scores(std::span<const float> q) const {
  if (q.size() != dim())
    throw DimensionError("query has dimension " + std::to_string(q.size()) + ", index has " + std::to_string(dim()));
  std::vector<float> out(size());
  // [1 x d] x [d x n]; each output is a sequential dot product in row order.
  kernels::gemm(1, dim(), size(), q, transposed_.data(), out);
  return out;
}

void KnowledgeIndex::save(const std::filesystem::path& path, std::string_view config_json) const {
  std::vector<io::NamedTensor> table;
  table.push_back({"index.embeddings", embeddings_});
  table.push_back({"index.ids", io::bytes_to_tensor(json(ids_).dump())});
  const json meta = {{"encoder_fingerprint", hex64(encoder_fp_)}, {"base_fingerprint", hex64(base_fp_)}};
  table.push_back({"index.meta", io::bytes_to_tensor(meta.dump())});
  if (!config_json.empty()) table.push_back({"meta.config", io::bytes_to_tensor(config_json)});
  io::write_tensor_file(path, table);
}

KnowledgeIndex KnowledgeIndex::load(const std::filesystem::path& path) {
  const auto table = io::read_tensor_file(path);
  const Tensor* emb = nullptr;
  std::string ids_json, meta_json;
  for (const auto& nt : table) {
    if (nt.name == "index.embeddings") emb = &nt.tensor;
    else if (nt.name == "index.ids") ids_json = io::tensor_to_bytes(nt.tensor);
    else if (nt.name == "index.meta") meta_json = io::tensor_to_bytes(nt.tensor);
  }
  if (!emb || ids_json.empty() || meta_json.empty()) throw FormatError(path.string() + " is not a knowledge index");
  try {
    auto ids = json::parse(ids_json).get<std::vector<std::string>>();
    const json meta = json::parse(meta_json);
    const auto parse_hex = [](const std::string& s) { return std::stoull(s, nullptr, 16); };
    return KnowledgeIndex(std::move(ids), *emb, parse_hex(meta.at("encoder_fingerprint").get<std::string>()),
                          parse_hex(meta.at("base_fingerprint").get<std::string>()));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed index metadata: " + e.what());
  }
}

namespace {

std::vector<float> encode_one(EncoderStack& enc, const text::Vocabulary& vocab, std::string_view passage) {
  Graph<float> g(false);
  const auto seq = text::encode(passage, vocab);
  const Var v = encode_text(g, std::span<const text::TokenId>(seq.ids), enc, Modality::kKnowledge).vec;
  return g.value(v).storage();
}

}  // namespace

KnowledgeIndex embed_passages(std::span<const KnowledgeItem> base, DualEncoder& encoders,
                              const text::Vocabulary& vocab) {
  if (base.empty()) throw DataError("knowledge base is empty");
  const std::size_t d = encoders.passage().dim();
  std::vector<float> rows;
  rows.reserve(base.size() * d);
  std::vector<std::string> ids;
  for (const auto& item : base) {
    const auto v = encode_one(encoders.passage(), vocab, item.text);
    rows.insert(rows.end(), v.begin(), v.end());
    ids.push_back(item.id);
  }
  return KnowledgeIndex(std::move(ids), Tensor::from({base.size(), d}, std::move(rows)), encoders.fingerprint(),
                        knowledge_fingerprint(base));
}

std::vector<float> embed_query(std::span<const std::string> captions, DualEncoder& encoders,
                               const text::Vocabulary& vocab) {
  if (captions.empty()) throw DataError("cannot form a query from an empty caption list");
  std::vector<text::TokenSequence> seqs;
  for (const auto& c : captions) seqs.push_back(text::encode(c, vocab));
  Graph<float> g(false);
  const Var v = sum_of_encodings(g, std::span<const text::TokenSequence>(seqs), encoders.query());
  return g.value(v).storage();
}

std::vector<Hit> search_topk(const KnowledgeIndex& index, std::span<const float> q, std::size_t p) {
  if (p == 0) throw ContractError("search_topk needs P >= 1");
  const auto s = index.scores(q);
  std::vector<std::size_t> order(index.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& ids = index.ids();
  const auto better = [&](std::size_t a, std::size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return ids[a] < ids[b];
  };
  const std::size_t k = std::min(p, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < k; ++i) hits.push_back({order[i], ids[order[i]], s[order[i]]});
  return hits;
}

const std::vector<Hit>* RetrievalCache::find(const std::string& instance_id, std::uint64_t fingerprint,
                                             std::size_t p) const {
  auto it = entries_.find({instance_id, fingerprint, p});
  if (it == entries_.end()) return nullptr;
  ++hits_;
  return &it->second;
}

void RetrievalCache::store(const std::string& instance_id, std::uint64_t fingerprint, std::size_t p,
                           std::vector<Hit> hits) {
  entries_[{instance_id, fingerprint, p}] = std::move(hits);
}

std::vector<Hit> retrieve_for_instance(const data::Instance& inst, const KnowledgeIndex& index,
                                       DualEncoder& encoders, const text::Vocabulary& vocab, std::size_t p,
                                       RetrievalCache& cache) {
  if (index.encoder_fingerprint() != encoders.fingerprint())
    throw StaleIndexError("index was built with encoder weights " + hex64(index.encoder_fingerprint()) +
                          " but the current encoders are " + hex64(encoders.fingerprint()) + "; rebuild the index");
  if (inst.captions.empty()) throw DataError("instance '" + inst.id + "' has no captions to query with");
  const std::uint64_t fp = index.fingerprint();
  if (const auto* hit = cache.find(inst.id, fp, p)) return *hit;
  auto hits = search_topk(index, embed_query(inst.captions, encoders, vocab), p);
  cache.store(inst.id, fp, p, hits);
  return hits;
}

}  // namespace exvqa::retrieval
