#include "kpgen/model/model.hpp"

#include <cmath>
#include <string>

#include "kpgen/errors.hpp"

namespace kpgen {

CopyActivation parse_copy_activation(const std::string& name) {
  if (name == "tanh") return CopyActivation::kTanh;
  if (name == "sigmoid") return CopyActivation::kSigmoid;
  if (name == "identity") return CopyActivation::kIdentity;
  throw ConfigError("unknown copy activation '" + name + "'");
}

std::string to_string(CopyActivation a) {
  switch (a) {
    case CopyActivation::kTanh:
      return "tanh";
    case CopyActivation::kSigmoid:
      return "sigmoid";
    case CopyActivation::kIdentity:
      return "identity";
  }
  return "tanh";
}

void ModelConfig::validate() const {
  if (vocab_size <= Vocabulary::kReserved) {
    throw ConfigError("vocab_size must exceed the " + std::to_string(Vocabulary::kReserved) +
                      " reserved tokens");
  }
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be at least 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  if (!(init_range > 0.0)) throw ConfigError("init_range must be positive");
}

std::vector<std::pair<std::string, Shape>> KeyphraseModel::layout(const ModelConfig& c) {
  const std::size_t V = c.vocab_size, E = c.embedding_dim, H = c.hidden_dim;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embedding", Shape{V, E});
  if (!c.share_embeddings) out.emplace_back("decoder.embedding", Shape{V, E});
  for (const char* dir : {"encoder.forward", "encoder.backward"}) {
    out.emplace_back(std::string(dir) + ".w_input", Shape{3 * H, E});
    out.emplace_back(std::string(dir) + ".w_hidden", Shape{3 * H, H});
    out.emplace_back(std::string(dir) + ".bias", Shape{3 * H});
  }
  out.emplace_back("bridge.weight", Shape{H, 2 * H});
  out.emplace_back("bridge.bias", Shape{H});
  out.emplace_back("init.weight", Shape{H, H});
  out.emplace_back("init.bias", Shape{H});
  out.emplace_back("decoder.w_input", Shape{3 * H, E + H});
  out.emplace_back("decoder.w_hidden", Shape{3 * H, H});
  out.emplace_back("decoder.bias", Shape{3 * H});
  out.emplace_back("attention.w_state", Shape{H, H});
  out.emplace_back("attention.w_memory", Shape{H, H});
  out.emplace_back("attention.v", Shape{H});
  if (c.copy_enabled) out.emplace_back("copy.weight", Shape{H, H});
  out.emplace_back("output.weight", Shape{V, 2 * H});
  out.emplace_back("output.bias", Shape{V});
  return out;
}

KeyphraseModel::KeyphraseModel(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto expected = layout(config_);
  if (params_.size() != expected.size()) {
    throw ConfigError("model expects " + std::to_string(expected.size()) + " parameter arrays, got " +
                      std::to_string(params_.size()));
  }
  for (std::size_t s = 0; s < expected.size(); ++s) {
    if (params_.name(s) != expected[s].first || params_[s].shape() != expected[s].second) {
      throw ConfigError("parameter slot " + std::to_string(s) + " is " + params_.name(s) + " " +
                        shape_string(params_[s].shape()) + ", expected " + expected[s].first + " " +
                        shape_string(expected[s].second));
    }
    if (!params_[s].all_finite()) throw NumericError("non-finite values in " + params_.name(s));
  }
  auto slot = [&](const char* name) { return params_.slot(name); };
  auto gru = [&](const std::string& prefix) {
    return Gru{params_.slot(prefix + ".w_input"), params_.slot(prefix + ".w_hidden"),
               params_.slot(prefix + ".bias")};
  };
  slots_.embedding = slot("embedding");
  slots_.decoder_embedding =
      config_.share_embeddings ? slots_.embedding : slot("decoder.embedding");
  slots_.encoder_forward = gru("encoder.forward");
  slots_.encoder_backward = gru("encoder.backward");
  slots_.decoder = gru("decoder");
  slots_.bridge_weight = slot("bridge.weight");
  slots_.bridge_bias = slot("bridge.bias");
  slots_.init_weight = slot("init.weight");
  slots_.init_bias = slot("init.bias");
  slots_.attn_state = slot("attention.w_state");
  slots_.attn_memory = slot("attention.w_memory");
  slots_.attn_v = slot("attention.v");
  slots_.copy_weight = config_.copy_enabled ? slot("copy.weight") : 0;
  slots_.out_weight = slot("output.weight");
  slots_.out_bias = slot("output.bias");
}

KeyphraseModel KeyphraseModel::initialize(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  std::uniform_real_distribution<double> unif(-config.init_range, config.init_range);
  ParamStore params;
  for (auto& [name, shape] : layout(config)) {
    Tensor t(shape);
    for (double& v : t.values()) v = unif(rng);
    params.add(name, std::move(t));
  }
  return KeyphraseModel(config, std::move(params));
}

namespace {

Var maybe_dropout(Tape& tape, Var x, bool enabled, const ModelConfig& config,
                  const ForwardOptions& options) {
  if (!enabled || !options.training || config.dropout_rate == 0.0) return x;
  if (!options.rng) throw UsageError("training forward pass with dropout needs an rng");
  return ops::dropout(tape, x, config.dropout_rate, true, *options.rng);
}

ops::GruWeights gru_weights(Tape& tape, const ParamStore& p, const KeyphraseModel::Gru& g) {
  return {tape.param(p, g.w_input), tape.param(p, g.w_hidden), tape.param(p, g.bias)};
}

Var activate(Tape& tape, Var x, CopyActivation a) {
  switch (a) {
    case CopyActivation::kTanh:
      return ops::tanh(tape, x);
    case CopyActivation::kSigmoid:
      return ops::sigmoid(tape, x);
    case CopyActivation::kIdentity:
      return x;
  }
  return x;
}

}  // namespace

EncoderOutput encode(Tape& tape, const KeyphraseModel& model, std::span<const TokenId> source_ids,
                     const ForwardOptions& options) {
  if (source_ids.empty()) throw UsageError("encode: empty source");
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& s = model.slots();
  const std::size_t T = source_ids.size();
  const std::size_t H = cfg.hidden_dim;

  Var embedding = tape.param(p, s.embedding);
  std::vector<Var> inputs;
  inputs.reserve(T);
  for (TokenId id : source_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw UsageError("encode: source id " + std::to_string(id) + " outside the vocabulary");
    }
    Var e = ops::row(tape, embedding, static_cast<std::size_t>(id));
    inputs.push_back(maybe_dropout(tape, e, cfg.dropout_on_embeddings, cfg, options));
  }

  EncoderOutput out;
  out.length = T;
  const Var zero = tape.input(Tensor({H}, 0.0));
  auto fwd = gru_weights(tape, p, s.encoder_forward);
  auto bwd = gru_weights(tape, p, s.encoder_backward);
  out.forward_states.resize(T);
  out.backward_states.resize(T);
  Var h = zero;
  for (std::size_t t = 0; t < T; ++t) {
    h = ops::gru_cell(tape, inputs[t], h, fwd);
    out.forward_states[t] = h;
  }
  h = zero;
  for (std::size_t t = T; t-- > 0;) {
    h = ops::gru_cell(tape, inputs[t], h, bwd);
    out.backward_states[t] = h;
  }

  Var bridge_w = tape.param(p, s.bridge_weight);
  Var bridge_b = tape.param(p, s.bridge_bias);
  std::vector<Var> combined;
  combined.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<Var> both{out.forward_states[t], out.backward_states[t]};
    combined.push_back(
        ops::tanh(tape, ops::affine(tape, bridge_w, ops::concat(tape, both), bridge_b)));
  }
  out.states = ops::stack_rows(tape, combined);
  out.initial_state =
      ops::tanh(tape, ops::affine(tape, tape.param(p, s.init_weight), out.backward_states.front(),
                                  tape.param(p, s.init_bias)));
  out.attention_keys = ops::matmul_bt(tape, out.states, tape.param(p, s.attn_memory));
  if (cfg.copy_enabled) {
    out.copy_features = activate(
        tape, ops::matmul(tape, out.states, tape.param(p, s.copy_weight)), cfg.copy_activation);
  }
  return out;
}

Attention attend(Tape& tape, const KeyphraseModel& model, Var prev_state,
                 const EncoderOutput& encoded) {
  if (encoded.length == 0) throw UsageError("attend: empty encoder output");
  const auto& p = model.params();
  const auto& s = model.slots();
  Var query = ops::matvec(tape, tape.param(p, s.attn_state), prev_state);
  Var hidden = ops::tanh(tape, ops::add_row(tape, encoded.attention_keys, query));
  Var scores = ops::matvec(tape, hidden, tape.param(p, s.attn_v));
  Attention a;
  a.weights = ops::softmax(tape, scores);
  a.context = ops::matvec_t(tape, encoded.states, a.weights);
  return a;
}

DecoderStep decode_step(Tape& tape, const KeyphraseModel& model, TokenId prev_id, Var prev_state,
                        const EncoderOutput& encoded, const EncodedPair& pair,
                        const ForwardOptions& options) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& s = model.slots();
  if (prev_id < 0 || static_cast<std::size_t>(prev_id) >= cfg.vocab_size + pair.oov_words.size()) {
    throw UsageError("decode_step: token id " + std::to_string(prev_id) +
                     " beyond the extended vocabulary of this source");
  }
  const auto input_id = static_cast<std::size_t>(prev_id) < cfg.vocab_size
                            ? static_cast<std::size_t>(prev_id)
                            : static_cast<std::size_t>(Vocabulary::kUnk);

  Var embedded = ops::row(tape, tape.param(p, s.decoder_embedding), input_id);
  embedded = maybe_dropout(tape, embedded, cfg.dropout_on_embeddings, cfg, options);

  Attention att = attend(tape, model, prev_state, encoded);
  std::vector<Var> gru_in{embedded, att.context};
  DecoderStep step;
  step.attention = att.weights;
  step.state = ops::gru_cell(tape, ops::concat(tape, gru_in), prev_state,
                             gru_weights(tape, p, s.decoder));

  std::vector<Var> readout_parts{step.state, att.context};
  Var readout = maybe_dropout(tape, ops::concat(tape, readout_parts), cfg.dropout_on_output, cfg,
                              options);
  Var generation = ops::affine(tape, tape.param(p, s.out_weight), readout, tape.param(p, s.out_bias));
  if (cfg.copy_enabled) {
    Var copy = ops::matvec(tape, encoded.copy_features, step.state);
    std::vector<Var> joint{generation, copy};
    step.scores = ops::concat(tape, joint);
  } else {
    step.scores = generation;
  }
  return step;
}

std::vector<std::size_t> target_members(TokenId target, const EncodedPair& pair,
                                        const ModelConfig& config) {
  const std::size_t V = config.vocab_size;
  if (target < 0 || static_cast<std::size_t>(target) >= V + pair.oov_words.size()) {
    throw UsageError("target id " + std::to_string(target) + " beyond the extended vocabulary");
  }
  const auto t = static_cast<std::size_t>(target);
  std::vector<std::size_t> members;
  if (!config.copy_enabled) {
    members.push_back(t < V ? t : static_cast<std::size_t>(Vocabulary::kUnk));
    return members;
  }
  if (t < V) members.push_back(t);
  for (std::size_t j = 0; j < pair.source_extended_ids.size(); ++j) {
    if (pair.source_extended_ids[j] == target) members.push_back(V + j);
  }
  return members;
}

std::vector<double> extended_distribution(std::span<const double> scores, const EncodedPair& pair,
                                          const ModelConfig& config) {
  const std::size_t V = config.vocab_size;
  const std::size_t T = pair.source_extended_ids.size();
  const std::size_t expected = config.copy_enabled ? V + T : V;
  if (scores.size() != expected) {
    throw UsageError("extended_distribution: expected " + std::to_string(expected) + " scores, got " +
                     std::to_string(scores.size()));
  }
  std::vector<double> joint = softmax(scores);
  std::vector<double> probs(V + pair.oov_words.size(), 0.0);
  for (std::size_t i = 0; i < V; ++i) probs[i] = joint[i];
  if (config.copy_enabled) {
    for (std::size_t j = 0; j < T; ++j) {
      probs[static_cast<std::size_t>(pair.source_extended_ids[j])] += joint[V + j];
    }
  }
  return probs;
}

Var pair_loss(Tape& tape, const KeyphraseModel& model, const EncodedPair& pair,
              const ForwardOptions& options) {
  if (pair.target_ids.empty() || pair.target_ids.back() != Vocabulary::kEos) {
    throw UsageError("pair_loss: target must be non-empty and end with <eos>");
  }
  EncoderOutput encoded = encode(tape, model, pair.source_ids, options);
  Var state = encoded.initial_state;
  TokenId prev = Vocabulary::kBos;
  std::vector<Var> step_losses;
  step_losses.reserve(pair.target_ids.size());
  for (std::size_t t = 0; t < pair.target_ids.size(); ++t) {
    DecoderStep step = decode_step(tape, model, prev, state, encoded, pair, options);
    const TokenId target = pair.target_ids[t];
    auto members = target_members(target, pair, model.config());
    Var log_p;
    try {
      log_p = ops::log_softmax_mass(tape, step.scores, members);
    } catch (const NumericError& e) {
      throw NumericError("pair_loss: step " + std::to_string(t) + ": " + e.what());
    }
    if (!std::isfinite(tape.value(log_p)[0])) {
      throw NumericError("pair_loss: zero probability for the target at step " + std::to_string(t));
    }
    step_losses.push_back(ops::scale(tape, log_p, -1.0));
    state = step.state;
    prev = target;
  }
  return ops::add_n(tape, step_losses);
}

double evaluate_pair_loss(const KeyphraseModel& model, const EncodedPair& pair) {
  Tape tape;
  return tape.value(pair_loss(tape, model, pair))[0];
}

}  // namespace kpgen
