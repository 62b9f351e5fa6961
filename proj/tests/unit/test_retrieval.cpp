#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "exvqa/error.hpp"
#include "exvqa/kernels.hpp"
#include "exvqa/retrieval.hpp"
#include "test_util.hpp"

using namespace exvqa;
using namespace exvqa::retrieval;

namespace {

KnowledgeIndex hand_index() {
  return KnowledgeIndex({"e1", "e2", "e3"}, Tensor::from({3, 2}, {1.0f, 0.0f, 0.0f, 1.0f, 0.7f, 0.7f}), 0, 0);
}

// Exhaustive scan in double with the same ordering rule.
std::vector<std::string> oracle_topk(const KnowledgeIndex& index, std::span<const float> q, std::size_t p) {
  const std::size_t d = index.dim();
  std::vector<std::pair<double, std::string>> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(index.embeddings()[i * d + j]) * q[j];
    all.emplace_back(s, index.ids()[i]);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(p, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<std::string> ids_of(const std::vector<Hit>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

struct Fixture {
  text::Vocabulary vocab;
  Rng rng{11};
  DualEncoder enc;
  std::vector<KnowledgeItem> base;

  static text::Vocabulary make_vocab() {
    std::vector<std::string> corpus{"the dog runs in the park", "a man rides a wave on a surfboard",
                                    "snow covers the mountain", "the cat sleeps on a sofa"};
    return text::Vocabulary::build(corpus, 1);
  }

  Fixture() : vocab(make_vocab()), enc(vocab.size(), EncoderConfig{16, 1, 2, 16, 32}, rng) {
    base = {{"k1", "the dog runs"}, {"k2", "a man rides a wave"}, {"k3", "snow covers the mountain"},
            {"k4", "the dog runs"}};
  }
};

}  // namespace

TEST_CASE("search_topk hand example") {
  auto index = hand_index();
  const float q[2] = {1.0f, 0.1f};
  auto hits = search_topk(index, q, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].id == "e1");
  CHECK(hits[0].score == doctest::Approx(1.0));
  CHECK(hits[1].id == "e3");
  CHECK(hits[1].score == doctest::Approx(0.77));
}

TEST_CASE("search_topk ties and clamping") {
  auto index = hand_index();
  const float zero[2] = {0.0f, 0.0f};
  CHECK(ids_of(search_topk(index, zero, 2)) == std::vector<std::string>{"e1", "e2"});
  const float q[2] = {1.0f, 0.1f};
  CHECK(ids_of(search_topk(index, q, 10)) == std::vector<std::string>{"e1", "e3", "e2"});
  const float q3[3] = {1, 0, 0};
  CHECK_THROWS_AS(search_topk(index, q3, 1), DimensionError);
  CHECK_THROWS_AS(search_topk(index, q, 0), ContractError);
}

TEST_CASE("ties break by id, not by row order") {
  KnowledgeIndex index({"z", "b", "m"}, Tensor::from({3, 1}, {1.0f, 1.0f, 1.0f}), 0, 0);
  const float q[1] = {2.0f};
  CHECK(ids_of(search_topk(index, q, 3)) == std::vector<std::string>{"b", "m", "z"});
}

TEST_CASE("index construction validates its rows") {
  CHECK_THROWS_AS(KnowledgeIndex({"a"}, Tensor::from({2, 2}, {1, 2, 3, 4}), 0, 0), DimensionError);
  CHECK_THROWS_AS(KnowledgeIndex({"a", "a"}, Tensor::from({2, 1}, {1, 2}), 0, 0), DataError);
}

TEST_CASE("search_topk matches an exhaustive oracle on 1000 passages x 100 queries") {
  const std::size_t n = 1000, d = 64;
  auto rows = testing::random_floats(n * d, 5);
  // Duplicated rows create exact ties that must resolve by id.
  for (std::size_t i = 0; i < 50; ++i)
    std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(i * d), d, rows.begin() + static_cast<std::ptrdiff_t>((n - 1 - i) * d));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
  KnowledgeIndex index(ids, Tensor::from({n, d}, rows), 0, 0);
  const auto checksum = index.content_checksum();
  std::size_t mismatches = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto q = testing::random_floats(d, 1000 + s);
    if (s % 10 == 0) std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(s * d), d, q.begin());
    auto got = ids_of(search_topk(index, q, 3));
    if (got != oracle_topk(index, q, 3)) ++mismatches;
    // Positive scaling leaves the ranking unchanged.
    for (float c : {0.5f, 3.0f, 1024.0f}) {
      std::vector<float> scaled(q);
      for (float& v : scaled) v *= c;
      if (ids_of(search_topk(index, scaled, 3)) != got) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
  CHECK(index.content_checksum() == checksum);
}

TEST_CASE("index scores agree bitwise across kernel backends") {
  const std::size_t n = 300, d = 40;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  KnowledgeIndex index(ids, Tensor::from({n, d}, testing::random_floats(n * d, 8)), 0, 0);
  auto q = testing::random_floats(d, 9);
  const auto saved = kernels::active().backend;
  kernels::select(kernels::Backend::kScalar);
  auto ref = index.scores(q);
  for (std::size_t i = 0; i < n; ++i) {
    float s = 0.0f;
    for (std::size_t j = 0; j < d; ++j) s = s + index.embeddings()[i * d + j] * q[j];
    CHECK(ref[i] == s);
  }
  for (auto b : {kernels::Backend::kAvx2, kernels::Backend::kNeon}) {
    if (!kernels::supported(b)) continue;
    kernels::select(b);
    CHECK(index.scores(q) == ref);
  }
  kernels::select(saved);
}

TEST_CASE("embed_passages builds one row per item") {
  Fixture f;
  auto index = embed_passages(f.base, f.enc, f.vocab);
  CHECK(index.size() == 4);
  CHECK(index.dim() == 16);
  CHECK(index.embeddings().dims() == Shape{4, 16});
  // Duplicate texts give identical rows.
  CHECK(std::equal(index.embeddings().data().begin(), index.embeddings().data().begin() + 16,
                   index.embeddings().data().begin() + 48));
  auto again = embed_passages(f.base, f.enc, f.vocab);
  CHECK(again.fingerprint() == index.fingerprint());
  CHECK(again.embeddings().same_values(index.embeddings()));
  CHECK_THROWS_AS(embed_passages(std::span<const KnowledgeItem>(), f.enc, f.vocab), DataError);

  auto other = f.base;
  other[0].text = "the cat sleeps";
  CHECK(embed_passages(other, f.enc, f.vocab).fingerprint() != index.fingerprint());
}

TEST_CASE("embed_query sums caption encodings") {
  Fixture f;
  std::vector<std::string> one{"the dog runs in the park"};
  Graph<float> g(false);
  auto seq = text::encode(one[0], f.vocab);
  auto single = g.value(encode_text(g, std::span<const text::TokenId>(seq.ids), f.enc.query()).vec).storage();
  CHECK(embed_query(one, f.enc, f.vocab) == single);

  std::vector<std::string> two{"the dog runs in the park", "snow covers the mountain"};
  std::vector<std::string> swapped{two[1], two[0]};
  auto q = embed_query(two, f.enc, f.vocab);
  CHECK(embed_query(swapped, f.enc, f.vocab) == q);
  auto a = embed_query(std::span(two).first(1), f.enc, f.vocab);
  auto b = embed_query(std::span(two).last(1), f.enc, f.vocab);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(q[i] == a[i] + b[i]);

  CHECK_THROWS_AS(embed_query(std::span<const std::string>(), f.enc, f.vocab), DataError);
}

TEST_CASE("retrieve_for_instance caches and detects stale indexes") {
  Fixture f;
  auto index = embed_passages(f.base, f.enc, f.vocab);
  data::Instance inst;
  inst.id = "x";
  inst.captions = {"a man rides a wave", "the dog runs"};
  RetrievalCache cache;
  auto k1 = retrieve_for_instance(inst, index, f.enc, f.vocab, 3, cache);
  CHECK(k1.size() == 3);
  CHECK(cache.size() == 1);
  auto k2 = retrieve_for_instance(inst, index, f.enc, f.vocab, 3, cache);
  CHECK(cache.hits() == 1);
  CHECK(ids_of(k2) == ids_of(k1));
  CHECK(ids_of(k1) == ids_of(search_topk(index, embed_query(inst.captions, f.enc, f.vocab), 3)));

  ParamList params;
  f.enc.collect(params);
  params[0].tensor->data()[0] += 1.0f;
  f.enc.invalidate();
  CHECK_THROWS_AS(retrieve_for_instance(inst, index, f.enc, f.vocab, 3, cache), StaleIndexError);
}

TEST_CASE("index file roundtrip") {
  Fixture f;
  testing::TempDir dir;
  auto index = embed_passages(f.base, f.enc, f.vocab);
  index.save(dir / "k.idx");
  auto back = KnowledgeIndex::load(dir / "k.idx");
  CHECK(back.ids() == index.ids());
  CHECK(back.embeddings().same_values(index.embeddings()));
  CHECK(back.fingerprint() == index.fingerprint());
  CHECK(back.encoder_fingerprint() == f.enc.fingerprint());
}

TEST_CASE("knowledge JSONL parsing") {
  auto items = parse_knowledge("{\"id\":\"q1\",\"text\":\"Surfing uses a BOARD.\"}\n\n{\"id\":\"q2\",\"text\":\"x\"}\n");
  REQUIRE(items.size() == 2);
  CHECK(items[0].text == "surfing uses a board .");
  CHECK_THROWS_AS(parse_knowledge("{\"id\":\"q1\",\"text\":\"a\"}\n{\"id\":\"q1\",\"text\":\"b\"}"), DataError);
  CHECK_THROWS_AS(parse_knowledge("{\"id\":\"q1\",\"text\":\" \"}"), DataError);
  CHECK_THROWS_AS(parse_knowledge("{\"id\":\"q1\"}"), DataError);
  CHECK_THROWS_AS(parse_knowledge("nope"), FormatError);
}
