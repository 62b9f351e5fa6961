#include "exvqa/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "exvqa/error.hpp"

namespace exvqa::text {

namespace {

const char* const kSpecialNames[] = {"<pad>", "<bos>", "<eos>", "<unk>", "because"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

// Length of the UTF-8 sequence starting at s[i], or 0 when malformed.
std::size_t utf8_length(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if (c < 0x80) return 1;
  if ((c & 0xE0) == 0xC0) {
    len = 2;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    len = 3;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    len = 4;
    cp = c & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (cc & 0x3F);
  }
  // Overlong forms, surrogates, and out-of-range code points.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return 0;
  if ((cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) return 0;
  return len;
}

}  // namespace

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 8);
  bool pending_space = false;
  auto emit_sep = [&] {
    if (!out.empty()) out.push_back(' ');
    pending_space = false;
  };
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    const std::size_t len = utf8_length(s, i);
    if (len == 0) throw DataError("invalid UTF-8 at byte " + std::to_string(i));
    if (len > 1) {
      if (pending_space) emit_sep();
      out.append(s.substr(i, len));
    } else if (is_space(c)) {
      pending_space = true;
    } else if (is_ascii_punct(c)) {
      emit_sep();
      out.push_back(static_cast<char>(c));
      pending_space = true;
    } else {
      if (pending_space) emit_sep();
      out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    i += len;
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view normalized) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < normalized.size()) {
    std::size_t end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    if (end > start) out.emplace_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (TokenId i = 0; i < kNumSpecials; ++i) tokens_.emplace_back(kSpecialNames[i]);
  ids_.emplace("because", kBecause);
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_freq) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus)
    for (auto& tok : split_tokens(normalize(line))) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_freq && tok != "because") kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  v.freeze();
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  v.freeze();
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file " + path.string());
  for (const auto& t : regular_tokens()) out << t << '\n';
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::add(std::string token) {
  if (frozen_) throw ContractError("vocabulary is frozen");
  if (token.empty() || token.find_first_of(" \t\r\n") != std::string::npos)
    throw DataError("vocabulary token must be non-empty and whitespace-free");
  if (ids_.count(token)) throw DataError("duplicate vocabulary token '" + token + "'");
  const auto id = static_cast<TokenId>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

TokenSequence encode(std::string_view s, const Vocabulary& vocab) {
  if (!vocab.frozen()) throw ContractError("encode needs a frozen vocabulary");
  TokenSequence seq;
  seq.source = std::string(s);
  for (const auto& tok : split_tokens(normalize(s))) seq.ids.push_back(vocab.id(tok));
  return seq;
}

std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace exvqa::text
