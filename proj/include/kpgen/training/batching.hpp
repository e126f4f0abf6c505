#pragma once

#include <random>
#include <span>
#include <vector>

#include "kpgen/model/model.hpp"

namespace kpgen {

/// A minibatch in padded form. Row b holds pair `indices[b]`; positions at or
/// past the row's length are <pad> and take no part in the loss.
struct Batch {
  std::vector<std::size_t> indices;
  std::size_t source_width = 0;
  std::size_t target_width = 0;
  std::vector<TokenId> source;  // [rows x source_width]
  std::vector<TokenId> target;  // [rows x target_width]
  std::vector<std::size_t> source_lengths;
  std::vector<std::size_t> target_lengths;

  std::size_t rows() const { return indices.size(); }
  std::size_t target_tokens() const;
};

/// Shuffles the pairs, sorts each pool of `pool_batches` batches by source
/// length to limit padding, and cuts the pools into batches of `batch_size`.
/// Only the final batch of an epoch can be short.
std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size,
                                std::mt19937_64& rng, std::size_t pool_batches = 20);

/// The unpadded pair for row `row`: the padded ids cut to the row's lengths,
/// with extended ids and OOV words taken from the original pair.
EncodedPair unpad_row(const Batch& batch, std::size_t row, std::span<const EncodedPair> pairs);

/// Summed negative log-likelihood of a batch (no dropout).
double evaluate_batch_loss(const KeyphraseModel& model, const Batch& batch,
                           std::span<const EncodedPair> pairs);

}  // namespace kpgen
