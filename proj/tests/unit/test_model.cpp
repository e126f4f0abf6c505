#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "kpgen/errors.hpp"
#include "kpgen/model/model.hpp"
#include "reference_model.hpp"

using namespace kpgen;
using namespace kpgen::testing;

namespace {

KeyphraseModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return KeyphraseModel::initialize(cfg, rng);
}

double sum_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("init_params is deterministic and within the init range") {
  auto cfg = tiny_config(20, true);
  auto a = make_model(cfg, 42);
  auto b = make_model(cfg, 42);
  CHECK(a.params() == b.params());
  CHECK_FALSE(a.params() == make_model(cfg, 43).params());
  double lo = 1.0, hi = -1.0;
  for (std::size_t s = 0; s < a.params().size(); ++s) {
    for (double v : a.params()[s].values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  CHECK(lo >= -0.1);
  CHECK(hi <= 0.1);
  CHECK(lo < -0.09);
  CHECK(hi > 0.09);
}

TEST_CASE("invalid model configurations are rejected") {
  auto cfg = tiny_config(20, true);
  cfg.embedding_dim = 0;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(KeyphraseModel::initialize(cfg, rng), ConfigError);
  cfg = tiny_config(20, true);
  cfg.hidden_dim = 0;
  CHECK_THROWS_AS(KeyphraseModel::initialize(cfg, rng), ConfigError);
  cfg = tiny_config(3, true);
  CHECK_THROWS_AS(KeyphraseModel::initialize(cfg, rng), ConfigError);

  auto good = make_model(tiny_config(20, true), 1);
  auto other = tiny_config(20, false);
  CHECK_THROWS_AS(KeyphraseModel(other, good.params()), ConfigError);
}

TEST_CASE("encode") {
  auto model = make_model(tiny_config(20, true), 3);
  SUBCASE("single token source") {
    Tape tape;
    std::vector<TokenId> src{7};
    auto enc = encode(tape, model, src);
    CHECK(enc.length == 1);
    CHECK(tape.shape(enc.states) == Shape{1, 12});
  }
  SUBCASE("empty source") {
    Tape tape;
    CHECK_THROWS_AS(encode(tape, model, std::vector<TokenId>{}), UsageError);
  }
  SUBCASE("reversal swaps the directions") {
    // With identical direction weights the forward pass over reverse(x)
    // reproduces the backward pass over x, position-reversed.
    auto& p = model.params();
    for (const char* part : {".w_input", ".w_hidden", ".bias"}) {
      p[p.slot(std::string("encoder.backward") + part)] =
          p[p.slot(std::string("encoder.forward") + part)];
    }
    std::vector<TokenId> src{5, 9, 12, 6}, rev(src.rbegin(), src.rend());
    Tape tape;
    auto a = encode(tape, model, src);
    auto b = encode(tape, model, rev);
    const std::size_t T = src.size();
    for (std::size_t j = 0; j < T; ++j) {
      auto fa = tape.value(a.forward_states[j]), bb = tape.value(b.backward_states[T - 1 - j]);
      auto ba = tape.value(a.backward_states[j]), fb = tape.value(b.forward_states[T - 1 - j]);
      for (std::size_t i = 0; i < fa.size(); ++i) {
        CHECK(fa[i] == bb[i]);
        CHECK(ba[i] == fb[i]);
      }
    }
  }
}

TEST_CASE("encoder gradients match finite differences on a three-token source") {
  auto model = make_model(tiny_config(12, true, 4, 5), 17);
  std::vector<TokenId> src{5, 8, 6};
  auto build = [&](Tape& t, const ParamStore&) {
    auto enc = encode(t, model, src);
    return ops::add(t, ops::sum(t, ops::tanh(t, enc.states)), ops::sum(t, enc.initial_state));
  };
  auto r = check_gradients_in_place(build, model.params());
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-4);
}

namespace {

// Hidden size 1 lets the alignment scores be set by hand: with W_state = 0,
// W_memory = 1 and v = 1, score_j = tanh(h_j).
struct ScalarAttention {
  KeyphraseModel model;
  ScalarAttention() : model(make_model(tiny_config(10, true, 2, 1), 1)) {
    auto& p = model.params();
    p[p.slot("attention.w_state")].fill(0.0);
    p[p.slot("attention.w_memory")].fill(1.0);
    p[p.slot("attention.v")].fill(1.0);
  }
  Attention run(Tape& tape, const std::vector<double>& h) {
    EncoderOutput enc;
    enc.length = h.size();
    enc.states = tape.input(Tensor({h.size(), 1}, h));
    enc.attention_keys = ops::matmul_bt(
        tape, enc.states, tape.param(model.params(), model.slots().attn_memory));
    return attend(tape, model, tape.input(Tensor({1}, 0.3)), enc);
  }
};

}  // namespace

TEST_CASE("attend") {
  ScalarAttention fx;
  SUBCASE("single position gets all the weight") {
    Tape tape;
    auto a = fx.run(tape, {0.4});
    CHECK(tape.value(a.weights)[0] == doctest::Approx(1.0));
    CHECK(tape.value(a.context)[0] == doctest::Approx(0.4));
  }
  SUBCASE("equal scores give uniform weights and the mean state") {
    auto& p = fx.model.params();
    p[p.slot("attention.v")].fill(0.0);
    Tape tape;
    auto a = fx.run(tape, {0.2, -0.6, 1.0});
    for (double w : tape.value(a.weights)) CHECK(w == doctest::Approx(1.0 / 3.0));
    CHECK(tape.value(a.context)[0] == doctest::Approx(0.2));
  }
  SUBCASE("scores [ln 3, 0] up to a shift give [0.75, 0.25]") {
    const double half = std::atanh(std::log(3.0) / 2.0);
    Tape tape;
    auto a = fx.run(tape, {half, -half});
    CHECK(tape.value(a.weights)[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(tape.value(a.weights)[1] == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("decode_step") {
  auto vocab = numbered_vocabulary(10);
  const auto V = vocab.size();
  std::vector<std::string> source{"w1", "rare", "w2", "w3", "w4", "w3", "other"};
  auto pair = encode_pair(source, std::vector<std::string>{"rare"}, vocab);

  SUBCASE("without copying the extended slots are zero") {
    auto model = make_model(tiny_config(V, false), 4);
    Tape tape;
    auto enc = encode(tape, model, pair.source_ids);
    auto step = decode_step(tape, model, Vocabulary::kBos, enc.initial_state, enc, pair);
    auto probs = extended_distribution(tape.value(step.scores), pair, model.config());
    REQUIRE(probs.size() == V + 2);
    CHECK(probs[V] == 0.0);
    CHECK(probs[V + 1] == 0.0);
    auto direct = softmax(tape.value(step.scores));
    for (std::size_t i = 0; i < V; ++i) CHECK(probs[i] == direct[i]);
  }
  SUBCASE("copy mass aggregates over positions and is zero for absent words") {
    auto model = make_model(tiny_config(V, true), 5);
    Tape tape;
    auto enc = encode(tape, model, pair.source_ids);
    auto step = decode_step(tape, model, Vocabulary::kBos, enc.initial_state, enc, pair);
    auto scores = tape.value(step.scores);
    auto probs = extended_distribution(scores, pair, model.config());
    double z = 0.0;
    for (double s : scores) z += std::exp(s);
    const auto w3 = static_cast<std::size_t>(vocab.id("w3"));
    const auto w7 = static_cast<std::size_t>(vocab.id("w7"));
    // w3 sits at source positions 3 and 5.
    double expected = (std::exp(scores[w3]) + std::exp(scores[V + 3]) + std::exp(scores[V + 5])) / z;
    CHECK(probs[w3] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(probs[w7] == softmax(scores)[w7]);
    CHECK(probs[V] > 0.0);  // "rare" can only be copied
    CHECK(sum_of(probs) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("ids beyond the extended vocabulary are rejected") {
    auto model = make_model(tiny_config(V, true), 5);
    Tape tape;
    auto enc = encode(tape, model, pair.source_ids);
    CHECK_THROWS_AS(
        decode_step(tape, model, static_cast<TokenId>(V + 2), enc.initial_state, enc, pair),
        UsageError);
    CHECK_NOTHROW(decode_step(tape, model, static_cast<TokenId>(V + 1), enc.initial_state, enc, pair));
  }
}

TEST_CASE("distributions sum to one, with and without OOV words") {
  std::mt19937_64 rng(77);
  auto vocab = numbered_vocabulary(10);
  for (bool copy : {true, false}) {
    auto model = make_model(tiny_config(vocab.size(), copy), copy ? 1 : 2);
    for (double oov : {0.0, 0.5, 1.0}) {
      for (int trial = 0; trial < 10; ++trial) {
        auto pair = random_pair(vocab, {1, 8, 3, oov}, rng);
        Tape tape;
        auto enc = encode(tape, model, pair.source_ids);
        Var state = enc.initial_state;
        for (TokenId y : pair.target_ids) {
          auto step = decode_step(tape, model, y, state, enc, pair);
          CHECK(sum_of(extended_distribution(tape.value(step.scores), pair, model.config())) ==
                doctest::Approx(1.0).epsilon(1e-9));
          CHECK(sum_of(tape.value(step.attention)) == doctest::Approx(1.0).epsilon(1e-9));
          state = step.state;
        }
      }
    }
  }
}

TEST_CASE("source-only OOV words are reachable only through copying") {
  auto vocab = numbered_vocabulary(10);
  auto pair = encode_pair(std::vector<std::string>{"w1", "zyx", "w2"},
                          std::vector<std::string>{"zyx"}, vocab);
  const auto zyx = static_cast<std::size_t>(vocab.size());
  for (bool copy : {true, false}) {
    auto model = make_model(tiny_config(vocab.size(), copy), 9);
    Tape tape;
    auto enc = encode(tape, model, pair.source_ids);
    auto step = decode_step(tape, model, Vocabulary::kBos, enc.initial_state, enc, pair);
    auto probs = extended_distribution(tape.value(step.scores), pair, model.config());
    if (copy) {
      CHECK(probs[zyx] > 0.0);
    } else {
      CHECK(probs[zyx] == 0.0);
    }
  }
}

TEST_CASE("pair_loss") {
  auto vocab = numbered_vocabulary(10);
  std::mt19937_64 rng(5);

  SUBCASE("matches the loop-based reference forward pass") {
    for (bool copy : {true, false}) {
      auto model = make_model(tiny_config(vocab.size(), copy), 8);
      ReferenceModel ref(model);
      for (int trial = 0; trial < 20; ++trial) {
        auto pair = random_pair(vocab, {}, rng);
        CHECK(evaluate_pair_loss(model, pair) == doctest::Approx(ref.loss(pair)).epsilon(1e-10));
      }
    }
  }
  SUBCASE("is non-negative") {
    auto model = make_model(tiny_config(vocab.size(), true), 8);
    for (int trial = 0; trial < 50; ++trial) CHECK(evaluate_pair_loss(model, random_pair(vocab, {}, rng)) >= 0.0);
  }
  SUBCASE("a perfect predictor has zero loss") {
    auto model = make_model(tiny_config(vocab.size(), false), 8);
    auto& p = model.params();
    p[p.slot("output.weight")].fill(0.0);
    p[p.slot("output.bias")][Vocabulary::kEos] = 1000.0;
    EncodedPair pair = encode_pair(std::vector<std::string>{"w1", "w2"}, {}, vocab);
    CHECK(pair.target_ids == std::vector<TokenId>{Vocabulary::kEos});
    CHECK(evaluate_pair_loss(model, pair) == doctest::Approx(0.0).epsilon(1e-300));
  }
  SUBCASE("target must end with <eos>") {
    auto model = make_model(tiny_config(vocab.size(), true), 8);
    auto pair = random_pair(vocab, {}, rng);
    pair.target_ids.pop_back();
    CHECK_THROWS_AS(evaluate_pair_loss(model, pair), UsageError);
  }
  SUBCASE("dropout needs an rng and changes the loss") {
    auto cfg = tiny_config(vocab.size(), true);
    cfg.dropout_rate = 0.5;
    auto model = make_model(cfg, 8);
    auto pair = random_pair(vocab, {}, rng);
    Tape t1;
    ForwardOptions train{true, nullptr};
    CHECK_THROWS_AS(pair_loss(t1, model, pair, train), UsageError);
    std::mt19937_64 drop(3);
    train.rng = &drop;
    Tape t2;
    double noisy = t2.value(pair_loss(t2, model, pair, train))[0];
    CHECK(noisy != evaluate_pair_loss(model, pair));
  }
}

TEST_CASE("full model gradients match finite differences") {
  auto vocab = numbered_vocabulary(7);
  std::mt19937_64 rng(123);
  for (bool copy : {true, false}) {
    for (int trial = 0; trial < 3; ++trial) {
      auto cfg = tiny_config(vocab.size(), copy, 4, 5);
      cfg.init_range = 0.5;
      auto model = make_model(cfg, 100 + trial);
      auto pair = random_pair(vocab, {2, 4, 2, 0.3}, rng);
      auto build = [&](Tape& t, const ParamStore&) { return pair_loss(t, model, pair); };
      auto r = check_gradients_in_place(build, model.params());
      INFO(r.worst);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}
