#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kpgen {

using TokenId = std::int32_t;

/// Word <-> id map. Ids 0..4 are reserved for <pad>, <bos>, <eos>, <unk>,
/// <digit>; ordinary words follow in frequency order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kDigit = 4;
  static constexpr std::size_t kReserved = 5;

  Vocabulary();
  // `words` are the ordinary words in id order (reserved tokens excluded).
  explicit Vocabulary(std::vector<std::string> words);

  /// Keeps the `max_size` most frequent words; equal counts are ordered
  /// lexicographically, so the smaller word wins the last slot.
  static Vocabulary from_counts(const std::map<std::string, std::uint64_t>& counts,
                                std::size_t max_size);

  std::size_t size() const { return id_to_word_.size(); }
  TokenId id(std::string_view word) const;  // kUnk when absent
  bool contains(std::string_view word) const;
  const std::string& word(TokenId id) const;
  // Ordinary words in id order.
  std::span<const std::string> words() const;

  /// FNV-1a over the id-ordered word list.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_word_ == b.id_to_word_;
  }

 private:
  std::vector<std::string> id_to_word_;
  std::unordered_map<std::string, TokenId> word_to_id_;
};

}  // namespace kpgen
