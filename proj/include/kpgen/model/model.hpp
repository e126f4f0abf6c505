#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "kpgen/numerics/ops.hpp"
#include "kpgen/numerics/tape.hpp"
#include "kpgen/textproc/encoding.hpp"

namespace kpgen {

// The non-linearity applied to h_j^T W_c in the copy score.
enum class CopyActivation { kTanh, kSigmoid, kIdentity };

CopyActivation parse_copy_activation(const std::string& name);
std::string to_string(CopyActivation a);

struct ModelConfig {
  std::size_t vocab_size = 50000 + Vocabulary::kReserved;
  std::size_t embedding_dim = 150;
  std::size_t hidden_dim = 300;
  bool copy_enabled = true;
  double dropout_rate = 0.5;
  double init_range = 0.1;
  bool share_embeddings = true;
  CopyActivation copy_activation = CopyActivation::kTanh;
  // Where dropout applies during training.
  bool dropout_on_embeddings = true;
  bool dropout_on_output = true;

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Encoder-decoder parameters. Slot indices are fixed by the config; the
/// constructor checks that a given ParamStore has exactly the expected layout.
class KeyphraseModel {
 public:
  KeyphraseModel(ModelConfig config, ParamStore params);

  /// Every array i.i.d. uniform in [-init_range, init_range].
  static KeyphraseModel initialize(const ModelConfig& config, std::mt19937_64& rng);

  const ModelConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  struct Gru {
    std::size_t w_input, w_hidden, bias;
  };
  struct Slots {
    std::size_t embedding, decoder_embedding;
    Gru encoder_forward, encoder_backward, decoder;
    std::size_t bridge_weight, bridge_bias;
    std::size_t init_weight, init_bias;
    std::size_t attn_state, attn_memory, attn_v;
    std::size_t copy_weight;
    std::size_t out_weight, out_bias;
  };
  const Slots& slots() const { return slots_; }

  /// Names and shapes implied by a config, in slot order.
  static std::vector<std::pair<std::string, Shape>> layout(const ModelConfig& config);

 private:
  ModelConfig config_;
  ParamStore params_;
  Slots slots_{};
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
};

struct EncoderOutput {
  std::size_t length = 0;
  // Per-direction GRU states before combination; backward_states[j] is the
  // right-to-left state at position j.
  std::vector<Var> forward_states;
  std::vector<Var> backward_states;
  Var states;          // [T x H], h_j = tanh(W [f_j; b_j] + b)
  Var initial_state;   // s_0 = tanh(W b_1 + b)
  Var attention_keys;  // [T x H], W_memory h_j
  Var copy_features;   // [T x H], sigma(h_j^T W_c); only with copy enabled
};

EncoderOutput encode(Tape& tape, const KeyphraseModel& model, std::span<const TokenId> source_ids,
                     const ForwardOptions& options = {});

struct Attention {
  Var context;  // [H]
  Var weights;  // [T]
};

/// Additive attention: a(s, h_j) = v^T tanh(W_state s + W_memory h_j).
Attention attend(Tape& tape, const KeyphraseModel& model, Var prev_state,
                 const EncoderOutput& encoded);

struct DecoderStep {
  Var state;      // s_t
  Var scores;     // generation logits [V], followed by copy scores [T] when copying
  Var attention;  // alpha_t over source positions
};

/// One decoder step from token `prev_id` (plain or extended; extended ids
/// are fed back as <unk>).
DecoderStep decode_step(Tape& tape, const KeyphraseModel& model, TokenId prev_id, Var prev_state,
                        const EncoderOutput& encoded, const EncodedPair& pair,
                        const ForwardOptions& options = {});

/// Positions in DecoderStep::scores whose probability mass makes up the
/// probability of `target`: its generation slot (if in vocabulary) plus every
/// source position holding it (copy mode). Without copying, an extended id
/// is scored as <unk>.
std::vector<std::size_t> target_members(TokenId target, const EncodedPair& pair,
                                        const ModelConfig& config);

/// Probabilities over the extended vocabulary (vocab + this pair's OOVs).
std::vector<double> extended_distribution(std::span<const double> scores, const EncodedPair& pair,
                                          const ModelConfig& config);

/// Teacher-forced negative log-likelihood of pair.target_ids, summed over steps.
Var pair_loss(Tape& tape, const KeyphraseModel& model, const EncodedPair& pair,
              const ForwardOptions& options = {});

/// Same value as pair_loss, without recording gradients.
double evaluate_pair_loss(const KeyphraseModel& model, const EncodedPair& pair);

}  // namespace kpgen
