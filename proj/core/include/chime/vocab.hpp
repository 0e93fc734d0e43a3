#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chime {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kCls = 1;
inline constexpr TokenId kSep = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReservedCount = 4;

/// Lowercases ASCII, splits on whitespace, and emits each ASCII punctuation
/// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with single spaces.
std::string join_tokens(std::span<const std::string> tokens);

/// Token <-> id bijection. Ids 0..3 are always [PAD], [CLS], [SEP], [UNK].
class Vocab {
 public:
  Vocab();

  /// Appends a token if absent; returns its id.
  TokenId add(const std::string& token);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(const std::string& token) const { return index_.contains(token); }
  TokenId id(const std::string& token) const;  // [UNK] when absent
  const std::string& token(TokenId id) const;

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<TokenId> encode_text(std::string_view text) const;
  /// Drops [PAD]; keeps the other reserved tokens verbatim.
  std::string decode(std::span<const TokenId> ids) const;

  /// One "token<TAB>id" line per entry, in id order, UTF-8.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Frequency-ranked vocabulary over `tokenize`d corpus text. Ties are broken
/// lexicographically. Throws std::invalid_argument when max_size cannot hold
/// the reserved tokens or the corpus is empty.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size);

}  // namespace chime
