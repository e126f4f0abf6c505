#include "kpgen/textproc/encoding.hpp"

#include <unordered_map>

#include "kpgen/errors.hpp"

namespace kpgen {

EncodedPair encode_source(std::span<const std::string> source, const Vocabulary& vocab) {
  EncodedPair pair;
  std::unordered_map<std::string, TokenId> oov_ids;
  pair.source_ids.reserve(source.size());
  pair.source_extended_ids.reserve(source.size());
  for (const auto& w : source) {
    TokenId id = vocab.id(w);
    pair.source_ids.push_back(id);
    if (id != Vocabulary::kUnk) {
      pair.source_extended_ids.push_back(id);
      continue;
    }
    auto [it, inserted] =
        oov_ids.emplace(w, static_cast<TokenId>(vocab.size() + pair.oov_words.size()));
    if (inserted) pair.oov_words.push_back(w);
    pair.source_extended_ids.push_back(it->second);
  }
  return pair;
}

EncodedPair encode_pair(std::span<const std::string> source, std::span<const std::string> target,
                        const Vocabulary& vocab) {
  EncodedPair pair = encode_source(source, vocab);
  pair.target_ids.reserve(target.size() + 1);
  for (const auto& w : target) {
    TokenId id = vocab.id(w);
    if (id == Vocabulary::kUnk) {
      for (std::size_t k = 0; k < pair.oov_words.size(); ++k) {
        if (pair.oov_words[k] == w) {
          id = static_cast<TokenId>(vocab.size() + k);
          break;
        }
      }
    }
    pair.target_ids.push_back(id);
  }
  pair.target_ids.push_back(Vocabulary::kEos);
  return pair;
}

const std::string& resolve_word(TokenId id, const EncodedPair& pair, const Vocabulary& vocab) {
  if (id < 0) throw UsageError("negative token id");
  auto uid = static_cast<std::size_t>(id);
  if (uid < vocab.size()) return vocab.word(id);
  if (uid - vocab.size() < pair.oov_words.size()) return pair.oov_words[uid - vocab.size()];
  throw UsageError("extended id " + std::to_string(id) + " beyond this source's " +
                   std::to_string(pair.oov_words.size()) + " OOV words");
}

std::vector<std::string> decode_target(const EncodedPair& pair, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (TokenId id : pair.target_ids) {
    if (id == Vocabulary::kEos) break;
    words.push_back(resolve_word(id, pair, vocab));
  }
  return words;
}

}  // namespace kpgen
