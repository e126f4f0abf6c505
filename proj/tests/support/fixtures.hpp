#pragma once

#include <random>
#include <string>
#include <vector>

#include "kpgen/model/model.hpp"
#include "kpgen/textproc/encoding.hpp"

namespace kpgen::testing {

// Vocabulary of `words` ordinary words named w0, w1, ...
inline Vocabulary numbered_vocabulary(std::size_t words) {
  std::vector<std::string> list;
  for (std::size_t i = 0; i < words; ++i) list.push_back("w" + std::to_string(i));
  return Vocabulary(std::move(list));
}

struct RandomPairSpec {
  std::size_t min_source = 1;
  std::size_t max_source = 6;
  std::size_t max_target = 3;
  double oov_rate = 0.3;  // chance that a source token is out of vocabulary
};

// Source tokens mix vocabulary words with OOV words o0, o1...; target tokens
// are drawn from the source, the vocabulary, or an unseen word.
inline EncodedPair random_pair(const Vocabulary& vocab, const RandomPairSpec& spec,
                               std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> src_len(spec.min_source, spec.max_source);
  std::uniform_int_distribution<std::size_t> tgt_len(1, spec.max_target);
  std::uniform_int_distribution<std::size_t> word(Vocabulary::kReserved, vocab.size() - 1);
  std::uniform_int_distribution<int> oov_word(0, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::string> source, target;
  for (std::size_t i = src_len(rng); i > 0; --i) {
    if (unif(rng) < spec.oov_rate) {
      source.push_back("o" + std::to_string(oov_word(rng)));
    } else {
      source.push_back(vocab.word(static_cast<TokenId>(word(rng))));
    }
  }
  std::uniform_int_distribution<std::size_t> pos(0, source.size() - 1);
  for (std::size_t i = tgt_len(rng); i > 0; --i) {
    double u = unif(rng);
    if (u < 0.5) {
      target.push_back(source[pos(rng)]);
    } else if (u < 0.9) {
      target.push_back(vocab.word(static_cast<TokenId>(word(rng))));
    } else {
      target.push_back("unseen");
    }
  }
  return encode_pair(source, target, vocab);
}

inline ModelConfig tiny_config(std::size_t vocab_size, bool copy, std::size_t emb = 8,
                               std::size_t hidden = 12) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.embedding_dim = emb;
  c.hidden_dim = hidden;
  c.copy_enabled = copy;
  c.dropout_rate = 0.0;
  return c;
}

}  // namespace kpgen::testing
