#pragma once

#include <span>
#include <string>
#include <vector>

#include "kpgen/model/model.hpp"
#include "kpgen/textproc/corpus.hpp"

namespace kpgen {

struct BeamConfig {
  std::size_t beam_size = 200;
  std::size_t max_depth = 6;  // decoder steps, counting the one that emits <eos>
  std::size_t max_phrases = 50;

  // Throws ConfigError.
  void validate() const;
};

struct Phrase {
  std::vector<TokenId> ids;  // plain or extended ids, without <eos>
  std::vector<std::string> words;
  double logprob = 0.0;
  // False when the phrase hit max_depth without emitting <eos>; its score
  // then covers only the emitted words.
  bool finished = true;

  std::string text() const;
};

/// Beam search from <bos>. Each depth expands every live hypothesis over the
/// extended vocabulary (minus <pad>, <bos>, <unk>, and <eos> as a first
/// token), keeps the beam_size best candidates, and moves those ending in
/// <eos> or reaching max_depth to the result list. Results are sorted by
/// log-probability, highest first; equal scores keep expansion order.
std::vector<Phrase> beam_search(const KeyphraseModel& model, const EncodedPair& source,
                                const Vocabulary& vocab, const BeamConfig& config);

/// Teacher-forced log-probability of `ids`, plus <eos> when `with_eos`.
double score_phrase(const KeyphraseModel& model, const EncodedPair& source,
                    std::span<const TokenId> ids, bool with_eos);

/// Drops phrases whose stemmed form repeats an earlier one, then keeps only
/// the first single-word phrase. Order is otherwise preserved.
std::vector<Phrase> postprocess(std::span<const Phrase> ranked);

struct Prediction {
  std::string id;
  std::vector<Phrase> keyphrases;
};

/// Tokenize, encode, search, post-process and cut to max_phrases.
Prediction predict(const KeyphraseModel& model, const Vocabulary& vocab, const Document& doc,
                   const BeamConfig& config);

/// {"id": ..., "keyphrases": [{"phrase": ..., "logprob": ...}, ...]}
std::string to_jsonl(const Prediction& prediction);

}  // namespace kpgen
