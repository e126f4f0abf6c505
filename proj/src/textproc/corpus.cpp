#include "kpgen/textproc/corpus.hpp"

#include <fstream>
#include <istream>
#include <map>

#include "json.hpp"
#include "kpgen/errors.hpp"
#include "kpgen/textproc/tokenizer.hpp"

namespace kpgen {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_document(const std::string& line, std::size_t line_no, Document& doc) {
  auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return false;

  auto get_text = [&](const char* key, std::string& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return true;
    if (!it->is_string()) return false;
    out = it->get<std::string>();
    return true;
  };
  if (!get_text("title", doc.title) || !get_text("abstract", doc.abstract)) return false;

  if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
    doc.id = it->is_string() ? it->get<std::string>() : it->dump();
  } else {
    doc.id = std::to_string(line_no);
  }

  if (auto it = j.find("keywords"); it != j.end() && !it->is_null()) {
    std::vector<std::string> raw;
    if (it->is_string()) {
      std::string all = it->get<std::string>();
      std::size_t start = 0;
      while (start <= all.size()) {
        auto end = all.find(';', start);
        if (end == std::string::npos) end = all.size();
        raw.push_back(all.substr(start, end - start));
        start = end + 1;
      }
    } else if (it->is_array()) {
      for (const auto& k : *it) {
        if (!k.is_string()) return false;
        raw.push_back(k.get<std::string>());
      }
    } else {
      return false;
    }
    for (auto& k : raw) {
      std::string t = trim(k);
      if (!t.empty()) doc.keyphrases.push_back(std::move(t));
    }
  }
  return true;
}

}  // namespace

CorpusReadResult read_corpus(std::istream& in) {
  CorpusReadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Document doc;
    if (parse_document(line, line_no, doc)) {
      result.documents.push_back(std::move(doc));
    } else {
      ++result.malformed_lines;
      if (result.malformed_line_numbers.size() < 20) result.malformed_line_numbers.push_back(line_no);
    }
  }
  return result;
}

CorpusReadResult read_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open corpus file: " + path);
  return read_corpus(in);
}

std::vector<std::string> source_tokens(const Document& doc) {
  std::vector<std::string> tokens = tokenize(doc.title);
  std::vector<std::string> body = tokenize(doc.abstract);
  if (!tokens.empty() && !body.empty()) tokens.emplace_back(".");
  tokens.insert(tokens.end(), std::make_move_iterator(body.begin()),
                std::make_move_iterator(body.end()));
  return tokens;
}

std::vector<std::vector<std::string>> keyphrase_tokens(const Document& doc) {
  std::vector<std::vector<std::string>> out;
  out.reserve(doc.keyphrases.size());
  for (const auto& k : doc.keyphrases) out.push_back(tokenize(k));
  return out;
}

Vocabulary build_vocabulary(const std::vector<Document>& corpus, const VocabularyOptions& options) {
  if (corpus.empty()) throw UsageError("build_vocabulary: empty corpus");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& doc : corpus) {
    for (auto& t : tokenize(doc.title)) ++counts[t];
    for (auto& t : tokenize(doc.abstract)) ++counts[t];
    if (options.count_keyphrases) {
      for (const auto& k : doc.keyphrases) {
        for (auto& t : tokenize(k)) ++counts[t];
      }
    }
  }
  return Vocabulary::from_counts(counts, options.max_size);
}

std::vector<TokenPair> split_pairs(const Document& doc) {
  std::vector<TokenPair> pairs;
  if (doc.keyphrases.empty()) return pairs;
  const auto source = source_tokens(doc);
  for (auto& target : keyphrase_tokens(doc)) {
    if (target.empty()) continue;
    pairs.push_back(TokenPair{source, std::move(target)});
  }
  return pairs;
}

PairSplitResult split_corpus(const std::vector<Document>& corpus) {
  PairSplitResult result;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    auto pairs = split_pairs(corpus[d]);
    if (pairs.empty()) {
      ++result.skipped_documents;
      continue;
    }
    for (auto& p : pairs) {
      result.pairs.push_back(std::move(p));
      result.pair_document.push_back(d);
    }
  }
  return result;
}

}  // namespace kpgen
