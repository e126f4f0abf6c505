#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kpgen/textproc/vocabulary.hpp"

namespace kpgen {

struct Document {
  std::string id;
  std::string title;
  std::string abstract;
  std::vector<std::string> keyphrases;
};

struct CorpusReadResult {
  std::vector<Document> documents;
  std::size_t malformed_lines = 0;
  std::vector<std::size_t> malformed_line_numbers;  // 1-based, first few only
};

/// JSON-lines corpus: {"id", "title", "abstract", "keywords"}; keywords is an
/// array of strings or one ';'-separated string. Blank lines are ignored;
/// lines that are not a JSON object with string title/abstract are counted as
/// malformed and skipped. A missing id becomes the 1-based line number.
CorpusReadResult read_corpus(std::istream& in);
CorpusReadResult read_corpus_file(const std::string& path);

/// Title tokens, a "." boundary, then abstract tokens. The boundary is
/// omitted when either part is empty.
std::vector<std::string> source_tokens(const Document& doc);
std::vector<std::vector<std::string>> keyphrase_tokens(const Document& doc);

struct VocabularyOptions {
  std::size_t max_size = 50000;
  bool count_keyphrases = true;
};

/// Frequency-ranked vocabulary over title + abstract (+ keyphrase) tokens.
Vocabulary build_vocabulary(const std::vector<Document>& corpus, const VocabularyOptions& options);

struct TokenPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

/// One (source, keyphrase) pair per keyphrase of the document.
std::vector<TokenPair> split_pairs(const Document& doc);

struct PairSplitResult {
  std::vector<TokenPair> pairs;
  std::vector<std::size_t> pair_document;  // index into the corpus per pair
  std::size_t skipped_documents = 0;       // documents without keyphrases
};

PairSplitResult split_corpus(const std::vector<Document>& corpus);

}  // namespace kpgen
