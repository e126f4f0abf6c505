#pragma once

#include <istream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpgen/textproc/corpus.hpp"
#include "kpgen/textproc/partition.hpp"

namespace kpgen {

using TokenPhrase = std::vector<std::string>;

/// Tokens of a phrase as written in a prediction or gold list. Special tokens
/// such as <digit> survive as single tokens.
TokenPhrase phrase_tokens(std::string_view text);

/// True iff both phrases have the same Porter-stemmed token sequence.
bool phrases_match(std::span<const std::string> a, std::span<const std::string> b);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Counts matches among the top min(k, |predicted|) predictions; each gold
/// phrase can be credited once. Throws UsageError when k is 0 or gold is empty.
std::size_t count_correct(std::span<const TokenPhrase> predicted, std::span<const TokenPhrase> gold,
                          std::size_t k);
Prf prf_at_k(std::span<const TokenPhrase> predicted, std::span<const TokenPhrase> gold, std::size_t k);
double recall_at_k(std::span<const TokenPhrase> predicted, std::span<const TokenPhrase> gold,
                   std::size_t k);

// How the absent-keyphrase recall is normalized: by the number of gold
// phrases (standard recall), or by the number of evaluated documents.
enum class RecallMode { kGold, kRecords };
RecallMode parse_recall_mode(const std::string& name);
std::string to_string(RecallMode mode);

struct PredictionRecord {
  std::string id;
  std::vector<std::string> phrases;  // ranked
};

/// Reads the JSON-lines prediction format. Throws UsageError on a malformed
/// line, naming the line number.
std::vector<PredictionRecord> read_predictions(std::istream& in);

struct EvalOptions {
  std::vector<std::size_t> ks{5, 10};
  MatchMode presence_mode = MatchMode::kStemmed;
  RecallMode recall_mode = RecallMode::kGold;
};

struct MetricRow {
  std::size_t k = 0;
  double precision = 0.0;      // present keyphrases, macro
  double recall = 0.0;         // present keyphrases, macro
  double f1 = 0.0;             // present keyphrases, macro
  double absent_recall = 0.0;  // absent keyphrases
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::size_t documents = 0;           // gold documents
  std::size_t present_documents = 0;   // with at least one present gold phrase
  std::size_t absent_documents = 0;    // with at least one absent gold phrase
  std::size_t missing_predictions = 0; // gold documents without a prediction record
  MatchMode presence_mode = MatchMode::kStemmed;
  RecallMode recall_mode = RecallMode::kGold;

  nlohmann::ordered_json to_json() const;
  std::string table() const;
};

/// Per-document present P/R/F1 and absent recall, macro-averaged over the
/// documents whose gold set for that metric is non-empty. Predictions are
/// split into present/absent by the same source-containment test as gold.
/// Throws UsageError listing prediction ids missing from the corpus, or on
/// duplicate prediction ids.
MetricReport evaluate_corpus(std::span<const PredictionRecord> predictions,
                             std::span<const Document> gold, const EvalOptions& options = {});

}  // namespace kpgen
