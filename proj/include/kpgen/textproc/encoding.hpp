#pragma once

#include <span>
#include <string>
#include <vector>

#include "kpgen/textproc/vocabulary.hpp"

namespace kpgen {

/// A source/keyphrase pair in id form. Source words missing from the
/// vocabulary are <unk> in `source_ids` but get a per-pair extended id
/// (vocab.size() + k, k indexing `oov_words`) in `source_extended_ids`, which
/// lets the copy path address them. Targets use those extended ids too.
struct EncodedPair {
  std::vector<TokenId> source_ids;
  std::vector<TokenId> source_extended_ids;
  std::vector<std::string> oov_words;
  std::vector<TokenId> target_ids;  // ends with <eos>; empty for prediction inputs

  std::size_t extended_size(const Vocabulary& vocab) const { return vocab.size() + oov_words.size(); }

  friend bool operator==(const EncodedPair&, const EncodedPair&) = default;
};

EncodedPair encode_pair(std::span<const std::string> source, std::span<const std::string> target,
                        const Vocabulary& vocab);
EncodedPair encode_source(std::span<const std::string> source, const Vocabulary& vocab);

/// Surface word for a plain or extended id. Throws UsageError for an id past
/// this pair's OOV list.
const std::string& resolve_word(TokenId id, const EncodedPair& pair, const Vocabulary& vocab);

/// Target words without the trailing <eos>.
std::vector<std::string> decode_target(const EncodedPair& pair, const Vocabulary& vocab);

}  // namespace kpgen
