#include "kpgen/decoding/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "kpgen/errors.hpp"
#include "kpgen/textproc/porter.hpp"
#include "kpgen/textproc/tokenizer.hpp"

namespace kpgen {

void BeamConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size must be at least 1");
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (max_phrases < 1) throw ConfigError("max_phrases must be at least 1");
}

std::string Phrase::text() const { return join_tokens(words); }

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-probabilities over the extended vocabulary, computed in log space so
// tiny probabilities keep their precision.
std::vector<double> extended_log_probs(std::span<const double> scores, const EncodedPair& pair,
                                       const ModelConfig& config) {
  const std::size_t V = config.vocab_size;
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(V + pair.oov_words.size(), kNegInf);
  for (std::size_t i = 0; i < V; ++i) out[i] = scores[i] - lse;
  if (config.copy_enabled) {
    for (std::size_t j = 0; j < pair.source_extended_ids.size(); ++j) {
      double& slot = out[static_cast<std::size_t>(pair.source_extended_ids[j])];
      const double add = scores[V + j] - lse;
      if (slot == kNegInf) {
        slot = add;
      } else {
        const double hi = std::max(slot, add), lo = std::min(slot, add);
        slot = hi + std::log1p(std::exp(lo - hi));
      }
    }
  }
  return out;
}

bool expandable(TokenId id, bool first_step) {
  if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kUnk) return false;
  return !(first_step && id == Vocabulary::kEos);
}

struct Live {
  std::vector<TokenId> ids;
  double logprob = 0.0;
  Tensor state;
};

struct Candidate {
  double logprob;
  std::size_t parent;
  TokenId token;
};

// Higher score first; equal scores in expansion order.
bool better(const Candidate& a, const Candidate& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

}  // namespace

std::vector<Phrase> beam_search(const KeyphraseModel& model, const EncodedPair& source,
                                const Vocabulary& vocab, const BeamConfig& config) {
  config.validate();
  if (source.source_ids.empty()) throw UsageError("beam_search: empty source");
  if (vocab.size() != model.config().vocab_size) {
    throw ConfigError("beam_search: vocabulary size does not match the model");
  }
  Tape tape;
  const EncoderOutput encoded = encode(tape, model, source.source_ids);
  const std::size_t after_encoding = tape.mark();

  std::vector<Live> live(1);
  live[0].state = tape.tensor(encoded.initial_state);
  std::vector<Phrase> results;

  for (std::size_t depth = 1; depth <= config.max_depth && !live.empty(); ++depth) {
    std::vector<Candidate> pool;
    std::vector<Tensor> stepped(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      tape.rewind(after_encoding);
      const TokenId prev = live[h].ids.empty() ? Vocabulary::kBos : live[h].ids.back();
      DecoderStep step =
          decode_step(tape, model, prev, tape.input(live[h].state), encoded, source);
      stepped[h] = tape.tensor(step.state);
      const auto lp = extended_log_probs(tape.value(step.scores), source, model.config());
      std::vector<Candidate> local;
      for (std::size_t w = 0; w < lp.size(); ++w) {
        const auto token = static_cast<TokenId>(w);
        if (lp[w] == kNegInf || !expandable(token, depth == 1)) continue;
        local.push_back({live[h].logprob + lp[w], h, token});
      }
      // Only a hypothesis' own best beam_size extensions can make the cut.
      const std::size_t keep = std::min(config.beam_size, local.size());
      std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(),
                        better);
      pool.insert(pool.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    const std::size_t keep = std::min(config.beam_size, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(),
                      better);
    pool.resize(keep);

    // Kept candidates leave the beam in selection order: <eos> finishes a
    // phrase, reaching max_depth truncates one, anything else stays live.
    std::vector<Live> next;
    for (const Candidate& c : pool) {
      const Live& parent = live[c.parent];
      if (c.token == Vocabulary::kEos) {
        Phrase p;
        p.ids = parent.ids;
        p.logprob = c.logprob;
        results.push_back(std::move(p));
        continue;
      }
      std::vector<TokenId> ids = parent.ids;
      ids.push_back(c.token);
      if (depth == config.max_depth) {
        Phrase p;
        p.ids = std::move(ids);
        p.logprob = c.logprob;
        p.finished = false;
        results.push_back(std::move(p));
      } else {
        next.push_back(Live{std::move(ids), c.logprob, stepped[c.parent]});
      }
    }
    live = std::move(next);
  }

  std::stable_sort(results.begin(), results.end(),
                   [](const Phrase& a, const Phrase& b) { return a.logprob > b.logprob; });
  for (auto& p : results) {
    for (TokenId id : p.ids) p.words.push_back(resolve_word(id, source, vocab));
  }
  return results;
}

double score_phrase(const KeyphraseModel& model, const EncodedPair& source,
                    std::span<const TokenId> ids, bool with_eos) {
  Tape tape;
  const EncoderOutput encoded = encode(tape, model, source.source_ids);
  Var state = encoded.initial_state;
  TokenId prev = Vocabulary::kBos;
  double total = 0.0;
  std::vector<TokenId> seq(ids.begin(), ids.end());
  if (with_eos) seq.push_back(Vocabulary::kEos);
  for (TokenId y : seq) {
    DecoderStep step = decode_step(tape, model, prev, state, encoded, source);
    const auto lp = extended_log_probs(tape.value(step.scores), source, model.config());
    if (y < 0 || static_cast<std::size_t>(y) >= lp.size()) {
      throw UsageError("score_phrase: token id " + std::to_string(y) + " beyond the extended vocabulary");
    }
    total += lp[static_cast<std::size_t>(y)];
    state = step.state;
    prev = y;
  }
  return total;
}

std::vector<Phrase> postprocess(std::span<const Phrase> ranked) {
  std::vector<Phrase> out;
  std::vector<std::vector<std::string>> seen;
  bool have_single = false;
  for (const Phrase& p : ranked) {
    auto stemmed = stem_phrase(p.words);
    if (std::find(seen.begin(), seen.end(), stemmed) != seen.end()) continue;
    seen.push_back(std::move(stemmed));
    if (p.words.size() == 1) {
      if (have_single) continue;
      have_single = true;
    }
    out.push_back(p);
  }
  return out;
}

Prediction predict(const KeyphraseModel& model, const Vocabulary& vocab, const Document& doc,
                   const BeamConfig& config) {
  const auto tokens = source_tokens(doc);
  if (tokens.empty()) throw UsageError("document '" + doc.id + "' has no source text");
  const EncodedPair source = encode_source(tokens, vocab);
  Prediction pred;
  pred.id = doc.id;
  pred.keyphrases = postprocess(beam_search(model, source, vocab, config));
  if (pred.keyphrases.size() > config.max_phrases) pred.keyphrases.resize(config.max_phrases);
  return pred;
}

std::string to_jsonl(const Prediction& prediction) {
  nlohmann::ordered_json phrases = nlohmann::ordered_json::array();
  for (const auto& p : prediction.keyphrases) {
    phrases.push_back({{"phrase", p.text()}, {"logprob", p.logprob}});
  }
  nlohmann::ordered_json j{{"id", prediction.id}, {"keyphrases", std::move(phrases)}};
  return j.dump();
}

}  // namespace kpgen
