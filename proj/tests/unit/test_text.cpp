#include <filesystem>
#include <random>

#include "doctest.h"
#include "exvqa/error.hpp"
#include "exvqa/text.hpp"

using namespace exvqa;
using namespace exvqa::text;

TEST_CASE("normalize examples") {
  CHECK(normalize("Is he SURFING?") == "is he surfing ?");
  CHECK(normalize("") == "");
  CHECK(normalize("a  b\tc") == "a b c");
  CHECK(normalize("  Yes!  ") == "yes !");
  CHECK(normalize("don't,stop") == "don ' t , stop");
  CHECK(normalize("Café au lait") == "café au lait");
}

TEST_CASE("normalize rejects malformed UTF-8") {
  CHECK_THROWS_AS(normalize(std::string("ab\xff")), DataError);
  CHECK_THROWS_AS(normalize(std::string("\xc3")), DataError);
  CHECK_THROWS_AS(normalize(std::string("\xc0\xaf")), DataError);
}

TEST_CASE("normalize is idempotent") {
  for (const char* s : {"Is he SURFING?", "x,y;z", "a  b", "(Hi) there!!"})
    CHECK(normalize(normalize(s)) == normalize(s));
}

TEST_CASE("build_vocab examples") {
  SUBCASE("frequency then lexicographic order") {
    const std::vector<std::string> corpus{"a b a"};
    auto v = Vocabulary::build(corpus, 1);
    REQUIRE(v.size() == 7);
    CHECK(v.token(5) == "a");
    CHECK(v.token(6) == "b");
    CHECK(v.frozen());
  }
  SUBCASE("threshold drops rare tokens") {
    const std::vector<std::string> corpus{"x"};
    auto v = Vocabulary::build(corpus, 2);
    CHECK(v.size() == 5);
    CHECK(encode("x", v).ids == std::vector<TokenId>{kUnk});
  }
  SUBCASE("because is the reserved special") {
    const std::vector<std::string> corpus{"yes because because it is"};
    auto v = Vocabulary::build(corpus, 1);
    CHECK(v.id("because") == kBecause);
    CHECK(v.size() == 5 + 3);
    for (auto& t : v.regular_tokens()) CHECK(t != "because");
  }
  SUBCASE("ties break lexicographically") {
    const std::vector<std::string> corpus{"zeta alpha mu", "mu"};
    auto v = Vocabulary::build(corpus, 1);
    CHECK(v.token(5) == "mu");
    CHECK(v.token(6) == "alpha");
    CHECK(v.token(7) == "zeta");
  }
  SUBCASE("empty corpus") {
    std::vector<std::string> none;
    CHECK_THROWS_AS(Vocabulary::build(none, 1), DataError);
  }
}

TEST_CASE("frozen vocabulary rejects insertion") {
  const std::vector<std::string> corpus{"a"};
  auto v = Vocabulary::build(corpus, 1);
  CHECK_THROWS_AS(v.add("new"), ContractError);
  Vocabulary open;
  CHECK_THROWS_AS(encode("a", open), ContractError);
}

TEST_CASE("encode and decode examples") {
  const std::vector<std::string> corpus{"he is surfing", "hi"};
  auto v = Vocabulary::build(corpus, 1);
  CHECK(decode(encode("he is surfing", v).ids, v) == "he is surfing");
  CHECK(encode("zyzzyva", v).ids == std::vector<TokenId>{kUnk});
  const TokenId ids[] = {kBos, v.id("hi"), kEos};
  CHECK(decode(ids, v) == "hi");
  const TokenId with_because[] = {v.id("he"), kBecause, kPad};
  CHECK(decode(with_because, v) == "he because");
  const TokenId bad[] = {static_cast<TokenId>(v.size())};
  CHECK_THROWS_AS(decode(bad, v), IndexError);
}

TEST_CASE("decode inverts encode on in-vocabulary text") {
  std::mt19937 rng(3);
  const std::vector<std::string> words{"the", "cat", "sat", "on", "mat", "because", "dog", "?", "!", ",", "red"};
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) {
    std::string s;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) {
      if (k) s += (rng() % 3 == 0) ? "  " : " ";
      std::string w = words[rng() % words.size()];
      if (rng() % 4 == 0) w[0] = static_cast<char>(std::toupper(w[0]));
      s += w;
    }
    corpus.push_back(s);
  }
  auto v = Vocabulary::build(corpus, 1);
  for (const auto& s : corpus) CHECK(decode(encode(s, v).ids, v) == normalize(s));
  auto again = Vocabulary::build(corpus, 1);
  CHECK(std::equal(v.regular_tokens().begin(), v.regular_tokens().end(), again.regular_tokens().begin(),
                   again.regular_tokens().end()));
}

TEST_CASE("vocabulary file round trip") {
  const std::vector<std::string> corpus{"b a c a", "c"};
  auto v = Vocabulary::build(corpus, 1);
  auto path = std::filesystem::temp_directory_path() / "exvqa_vocab_test.txt";
  v.save(path);
  auto loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  for (TokenId i = 0; i < static_cast<TokenId>(v.size()); ++i) CHECK(loaded.token(i) == v.token(i));
  std::filesystem::remove(path);
}
