#include "kpgen/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>

#include "kpgen/errors.hpp"
#include "kpgen/textproc/porter.hpp"
#include "kpgen/textproc/tokenizer.hpp"

namespace kpgen {

TokenPhrase phrase_tokens(std::string_view text) {
  TokenPhrase out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      const auto piece = text.substr(i, j - i);
      if (is_special_token(piece)) {
        out.emplace_back(piece);
      } else {
        for (auto& t : tokenize(piece)) out.push_back(std::move(t));
      }
    }
    i = j;
  }
  return out;
}

bool phrases_match(std::span<const std::string> a, std::span<const std::string> b) {
  return a.size() == b.size() && stem_phrase(a) == stem_phrase(b);
}

namespace {

std::vector<TokenPhrase> stemmed(std::span<const TokenPhrase> phrases, std::size_t limit) {
  std::vector<TokenPhrase> out;
  for (std::size_t i = 0; i < std::min(limit, phrases.size()); ++i) out.push_back(stem_phrase(phrases[i]));
  return out;
}

}  // namespace

std::size_t count_correct(std::span<const TokenPhrase> predicted, std::span<const TokenPhrase> gold,
                          std::size_t k) {
  if (k < 1) throw UsageError("k must be at least 1");
  if (gold.empty()) throw UsageError("empty gold set");
  const auto pred = stemmed(predicted, k);
  const auto ref = stemmed(gold, gold.size());
  std::vector<bool> used(ref.size(), false);
  std::size_t correct = 0;
  // Matching is equality of stem sequences, so greedy assignment is maximal.
  for (const auto& p : pred) {
    for (std::size_t g = 0; g < ref.size(); ++g) {
      if (!used[g] && ref[g] == p) {
        used[g] = true;
        ++correct;
        break;
      }
    }
  }
  return correct;
}

Prf prf_at_k(std::span<const TokenPhrase> predicted, std::span<const TokenPhrase> gold, std::size_t k) {
  const std::size_t correct = count_correct(predicted, gold, k);
  const std::size_t taken = std::min(k, predicted.size());
  Prf r;
  r.precision = taken ? static_cast<double>(correct) / static_cast<double>(taken) : 0.0;
  r.recall = static_cast<double>(correct) / static_cast<double>(gold.size());
  const double sum = r.precision + r.recall;
  r.f1 = sum > 0.0 ? 2.0 * r.precision * r.recall / sum : 0.0;
  return r;
}

double recall_at_k(std::span<const TokenPhrase> predicted, std::span<const TokenPhrase> gold,
                   std::size_t k) {
  return static_cast<double>(count_correct(predicted, gold, k)) / static_cast<double>(gold.size());
}

RecallMode parse_recall_mode(const std::string& name) {
  if (name == "gold") return RecallMode::kGold;
  if (name == "records") return RecallMode::kRecords;
  throw ConfigError("unknown recall mode '" + name + "' (expected gold or records)");
}

std::string to_string(RecallMode mode) { return mode == RecallMode::kGold ? "gold" : "records"; }

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PredictionRecord rec;
      const auto& id = j.at("id");
      rec.id = id.is_string() ? id.get<std::string>() : id.dump();
      for (const auto& kp : j.at("keyphrases")) {
        rec.phrases.push_back(kp.is_string() ? kp.get<std::string>() : kp.at("phrase").get<std::string>());
      }
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("predictions line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

namespace {

std::vector<TokenPhrase> to_phrases(const std::vector<std::string>& texts) {
  std::vector<TokenPhrase> out;
  for (const auto& t : texts) {
    auto p = phrase_tokens(t);
    if (!p.empty()) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

MetricReport evaluate_corpus(std::span<const PredictionRecord> predictions,
                             std::span<const Document> gold, const EvalOptions& options) {
  if (options.ks.empty()) throw UsageError("no cutoffs requested");
  for (std::size_t k : options.ks) {
    if (k < 1) throw UsageError("cutoffs must be at least 1");
  }
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) throw UsageError("duplicate prediction id '" + p.id + "'");
  }
  std::map<std::string, bool> known;
  for (const auto& d : gold) known[d.id] = true;
  std::vector<std::string> unknown;
  for (const auto& p : predictions) {
    if (!known.count(p.id)) unknown.push_back(p.id);
  }
  if (!unknown.empty()) {
    std::string list;
    for (std::size_t i = 0; i < unknown.size() && i < 20; ++i) list += (i ? ", " : "") + unknown[i];
    if (unknown.size() > 20) list += ", ...";
    throw UsageError(std::to_string(unknown.size()) + " prediction id(s) not in the gold corpus: " + list);
  }

  MetricReport report;
  report.presence_mode = options.presence_mode;
  report.recall_mode = options.recall_mode;
  const std::size_t K = options.ks.size();
  std::vector<double> p_sum(K, 0.0), r_sum(K, 0.0), f_sum(K, 0.0), absent_sum(K, 0.0);
  std::vector<double> present_correct(K, 0.0);

  for (const auto& doc : gold) {
    ++report.documents;
    const auto source = normalize_tokens(source_tokens(doc), options.presence_mode);
    const auto split = partition_keyphrases(doc, options.presence_mode);
    const auto present_gold = to_phrases(split.present);
    const auto absent_gold = to_phrases(split.absent);

    std::vector<TokenPhrase> present_pred, absent_pred;
    auto it = by_id.find(doc.id);
    if (it == by_id.end()) {
      ++report.missing_predictions;
    } else {
      for (auto& p : to_phrases(it->second->phrases)) {
        const auto norm = normalize_tokens(p, options.presence_mode);
        (contains_contiguous(source, norm) ? present_pred : absent_pred).push_back(std::move(p));
      }
    }

    if (!present_gold.empty()) ++report.present_documents;
    if (!absent_gold.empty()) ++report.absent_documents;
    for (std::size_t i = 0; i < K; ++i) {
      if (!present_gold.empty()) {
        const Prf m = prf_at_k(present_pred, present_gold, options.ks[i]);
        p_sum[i] += m.precision;
        f_sum[i] += m.f1;
        if (options.recall_mode == RecallMode::kGold) {
          r_sum[i] += m.recall;
        } else {
          r_sum[i] += static_cast<double>(count_correct(present_pred, present_gold, options.ks[i]));
        }
      }
      if (!absent_gold.empty()) {
        absent_sum[i] += options.recall_mode == RecallMode::kGold
                             ? recall_at_k(absent_pred, absent_gold, options.ks[i])
                             : static_cast<double>(count_correct(absent_pred, absent_gold, options.ks[i]));
      }
    }
  }

  auto mean = [](double total, std::size_t n) { return n ? total / static_cast<double>(n) : 0.0; };
  // Records mode divides correct counts by every gold document.
  const std::size_t present_den =
      options.recall_mode == RecallMode::kGold ? report.present_documents : report.documents;
  const std::size_t absent_den =
      options.recall_mode == RecallMode::kGold ? report.absent_documents : report.documents;
  for (std::size_t i = 0; i < K; ++i) {
    MetricRow row;
    row.k = options.ks[i];
    row.precision = mean(p_sum[i], report.present_documents);
    row.recall = mean(r_sum[i], present_den);
    row.f1 = mean(f_sum[i], report.present_documents);
    row.absent_recall = mean(absent_sum[i], absent_den);
    report.rows.push_back(row);
  }
  return report;
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json present = nlohmann::ordered_json::object();
  nlohmann::ordered_json absent = nlohmann::ordered_json::object();
  for (const auto& r : rows) {
    const std::string k = std::to_string(r.k);
    present["P@" + k] = r.precision;
    present["R@" + k] = r.recall;
    present["F1@" + k] = r.f1;
    absent["R@" + k] = r.absent_recall;
  }
  return {{"documents", documents},
          {"missing_predictions", missing_predictions},
          {"presence_mode", to_string(presence_mode)},
          {"recall_mode", to_string(recall_mode)},
          {"present", {{"documents", present_documents}, {"metrics", present}}},
          {"absent", {{"documents", absent_documents}, {"metrics", absent}}}};
}

std::string MetricReport::table() const {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%6s  %9s  %9s  %9s  %9s\n", "k", "P@k", "R@k", "F1@k", "absent R");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%6zu  %9.4f  %9.4f  %9.4f  %9.4f\n", r.k, r.precision, r.recall,
                  r.f1, r.absent_recall);
    os << buf;
  }
  os << "documents " << documents << ", with present gold " << present_documents
     << ", with absent gold " << absent_documents << ", without predictions "
     << missing_predictions << '\n';
  return os.str();
}

}  // namespace kpgen
