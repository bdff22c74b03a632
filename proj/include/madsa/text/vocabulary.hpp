#pragma once

#include "madsa/text/dialogue.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace madsa::text {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kSep = 4;
inline constexpr int kEmoPos = 5;
inline constexpr int kEmoNeg = 6;
inline constexpr int kReservedCount = 7;

inline constexpr std::size_t kDefaultMaxLen = 512;

// Lowercases, splits on whitespace, and splits each of . , ! ? ; : ' " into
// its own token.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

class Vocabulary {
 public:
  // Tokens with frequency >= min_count, ordered by descending frequency then
  // lexicographically, after the reserved ids.
  static Vocabulary build(std::span<const Dialogue> corpus, int min_count);
  static Vocabulary build_from_texts(std::span<const std::string> texts, int min_count);

  // Full id -> token list, reserved entries included.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;  // unk when absent
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string to_json() const;
  static Vocabulary from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

const std::vector<std::string>& reserved_tokens();

// Token ids of the text without markers.
std::vector<int> token_ids(std::string_view text, const Vocabulary& vocab);

// bos + ids + eos. Overlong input keeps the most recent max_len - 2 tokens.
std::vector<int> encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len = kDefaultMaxLen);

// Last kHistoryWindow turns joined by sep, wrapped and truncated like encode().
std::vector<int> encode_history(std::span<const std::string> turns, const Vocabulary& vocab,
                                std::size_t max_len = kDefaultMaxLen);

// Space-joined tokens, stopping at eos. Markers are dropped; unk renders as
// "<unk>".
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace madsa::text
