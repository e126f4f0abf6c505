#include "kpgen/textproc/vocabulary.hpp"

#include <algorithm>

#include "kpgen/errors.hpp"
#include "kpgen/textproc/tokenizer.hpp"

namespace kpgen {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  id_to_word_ = {std::string(kPadToken), std::string(kBosToken), std::string(kEosToken),
                 std::string(kUnkToken), std::string(kDigitToken)};
  for (auto& w : words) {
    if (is_special_token(w)) throw ConfigError("vocabulary word collides with reserved token: " + w);
    id_to_word_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < id_to_word_.size(); ++i) {
    auto [it, inserted] = word_to_id_.emplace(id_to_word_[i], static_cast<TokenId>(i));
    if (!inserted) throw ConfigError("duplicate vocabulary word: " + id_to_word_[i]);
  }
}

Vocabulary Vocabulary::from_counts(const std::map<std::string, std::uint64_t>& counts,
                                   std::size_t max_size) {
  if (max_size < 1) throw UsageError("vocabulary max_size must be at least 1");
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [w, c] : counts) {
    if (!is_special_token(w) && c > 0) ranked.emplace_back(w, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& [w, c] : ranked) words.push_back(std::move(w));
  return Vocabulary(std::move(words));
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = word_to_id_.find(std::string(word));
  return it == word_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return word_to_id_.count(std::string(word)) > 0;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_word_.size()) {
    throw UsageError("vocabulary id out of range: " + std::to_string(id));
  }
  return id_to_word_[static_cast<std::size_t>(id)];
}

std::span<const std::string> Vocabulary::words() const {
  return std::span<const std::string>(id_to_word_).subspan(kReserved);
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& w : id_to_word_) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace kpgen
