#include "kpgen/textproc/partition.hpp"

#include <algorithm>

#include "kpgen/errors.hpp"
#include "kpgen/textproc/porter.hpp"
#include "kpgen/textproc/tokenizer.hpp"

namespace kpgen {

MatchMode parse_match_mode(const std::string& name) {
  if (name == "stemmed") return MatchMode::kStemmed;
  if (name == "raw") return MatchMode::kRaw;
  throw ConfigError("unknown match mode '" + name + "' (expected stemmed or raw)");
}

std::string to_string(MatchMode mode) { return mode == MatchMode::kStemmed ? "stemmed" : "raw"; }

std::vector<std::string> normalize_tokens(std::span<const std::string> tokens, MatchMode mode) {
  if (mode == MatchMode::kStemmed) return stem_phrase(tokens);
  return {tokens.begin(), tokens.end()};
}

bool contains_contiguous(std::span<const std::string> haystack, std::span<const std::string> needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

PhrasePartition partition_keyphrases(const Document& doc, MatchMode mode) {
  PhrasePartition out;
  const auto source = normalize_tokens(source_tokens(doc), mode);
  for (const auto& k : doc.keyphrases) {
    const auto tokens = normalize_tokens(tokenize(k), mode);
    (contains_contiguous(source, tokens) ? out.present : out.absent).push_back(k);
  }
  return out;
}

PresenceStats presence_stats(const std::vector<Document>& corpus, MatchMode mode) {
  PresenceStats stats;
  for (const auto& doc : corpus) {
    if (doc.keyphrases.empty()) {
      ++stats.skipped_documents;
      continue;
    }
    ++stats.documents;
    auto part = partition_keyphrases(doc, mode);
    stats.present += part.present.size();
    stats.absent += part.absent.size();
    stats.keyphrases += doc.keyphrases.size();
  }
  return stats;
}

}  // namespace kpgen
