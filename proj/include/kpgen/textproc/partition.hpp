#pragma once

#include <span>
#include <string>
#include <vector>

#include "kpgen/textproc/corpus.hpp"

namespace kpgen {

enum class MatchMode { kStemmed, kRaw };

MatchMode parse_match_mode(const std::string& name);
std::string to_string(MatchMode mode);

// Stems when mode is kStemmed, copies otherwise.
std::vector<std::string> normalize_tokens(std::span<const std::string> tokens, MatchMode mode);

/// True iff `needle` (non-empty) occurs as a contiguous run in `haystack`.
bool contains_contiguous(std::span<const std::string> haystack, std::span<const std::string> needle);

struct PhrasePartition {
  std::vector<std::string> present;
  std::vector<std::string> absent;
};

/// Splits the document's keyphrases by whether their (normalized) token
/// sequence appears contiguously in the (normalized) source.
PhrasePartition partition_keyphrases(const Document& doc, MatchMode mode = MatchMode::kStemmed);

struct PresenceStats {
  std::size_t documents = 0;          // documents with at least one keyphrase
  std::size_t skipped_documents = 0;  // documents without keyphrases
  std::size_t keyphrases = 0;
  std::size_t present = 0;
  std::size_t absent = 0;

  double present_fraction() const { return keyphrases ? double(present) / double(keyphrases) : 0.0; }
  double absent_fraction() const { return keyphrases ? double(absent) / double(keyphrases) : 0.0; }
};

PresenceStats presence_stats(const std::vector<Document>& corpus, MatchMode mode);

}  // namespace kpgen
