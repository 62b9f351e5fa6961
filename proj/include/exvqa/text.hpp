#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace exvqa::text {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kBecause = 4;
inline constexpr TokenId kNumSpecials = 5;

/// Lowercases ASCII, splits ASCII punctuation into standalone tokens and
/// collapses whitespace. Throws DataError on malformed UTF-8.
std::string normalize(std::string_view s);

/// Splits already-normalized text on single spaces.
std::vector<std::string> split_tokens(std::string_view normalized);

/// Token <-> id map. Ids 0..4 are PAD, BOS, EOS, UNK, BECAUSE; the word
/// "because" always resolves to BECAUSE.
class Vocabulary {
 public:
  Vocabulary();

  /// Counts tokens of every normalized text and keeps those seen at least
  /// `min_freq` times, ordered by (count desc, token asc). Result is frozen.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t min_freq);
  /// Frozen vocabulary whose regular tokens take ids 5, 6, ... in order.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  /// One regular token per line; line i holds id i + 5.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// UNK for unknown tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  /// Surface form; specials render as <pad>, <bos>, <eos>, <unk>, because.
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }

  void add(std::string token);
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  /// Regular tokens in id order (what save() writes).
  std::span<const std::string> regular_tokens() const {
    return std::span<const std::string>(tokens_).subspan(static_cast<std::size_t>(kNumSpecials));
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  bool frozen_ = false;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  std::string source;
};

/// Normalizes then maps tokens to ids. The vocabulary must be frozen.
TokenSequence encode(std::string_view s, const Vocabulary& vocab);
/// Joins tokens with single spaces; PAD/BOS/EOS render as nothing.
std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace exvqa::text
