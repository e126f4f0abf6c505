#include "kpgen/training/batching.hpp"

#include <algorithm>
#include <numeric>

#include "kpgen/errors.hpp"

namespace kpgen {

std::size_t Batch::target_tokens() const {
  return std::accumulate(target_lengths.begin(), target_lengths.end(), std::size_t{0});
}

namespace {

Batch pad(std::span<const std::size_t> indices, std::span<const EncodedPair> pairs) {
  Batch b;
  b.indices.assign(indices.begin(), indices.end());
  for (std::size_t i : indices) {
    b.source_lengths.push_back(pairs[i].source_ids.size());
    b.target_lengths.push_back(pairs[i].target_ids.size());
  }
  b.source_width = *std::max_element(b.source_lengths.begin(), b.source_lengths.end());
  b.target_width = *std::max_element(b.target_lengths.begin(), b.target_lengths.end());
  b.source.assign(b.rows() * b.source_width, Vocabulary::kPad);
  b.target.assign(b.rows() * b.target_width, Vocabulary::kPad);
  for (std::size_t r = 0; r < b.rows(); ++r) {
    const auto& p = pairs[b.indices[r]];
    std::copy(p.source_ids.begin(), p.source_ids.end(), b.source.begin() + r * b.source_width);
    std::copy(p.target_ids.begin(), p.target_ids.end(), b.target.begin() + r * b.target_width);
  }
  return b;
}

}  // namespace

std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size,
                                std::mt19937_64& rng, std::size_t pool_batches) {
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (pool_batches < 1) throw UsageError("pool_batches must be at least 1");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t pool = batch_size * pool_batches;
  for (std::size_t start = 0; start < order.size(); start += pool) {
    auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + pool));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
      return pairs[a].source_ids.size() < pairs[b].source_ids.size();
    });
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    batches.push_back(pad(std::span(order).subspan(start, n), pairs));
  }
  return batches;
}

EncodedPair unpad_row(const Batch& batch, std::size_t row, std::span<const EncodedPair> pairs) {
  if (row >= batch.rows()) throw UsageError("unpad_row: row out of range");
  const auto& original = pairs[batch.indices[row]];
  EncodedPair p;
  auto src = batch.source.begin() + static_cast<std::ptrdiff_t>(row * batch.source_width);
  auto tgt = batch.target.begin() + static_cast<std::ptrdiff_t>(row * batch.target_width);
  p.source_ids.assign(src, src + static_cast<std::ptrdiff_t>(batch.source_lengths[row]));
  p.target_ids.assign(tgt, tgt + static_cast<std::ptrdiff_t>(batch.target_lengths[row]));
  p.source_extended_ids = original.source_extended_ids;
  p.oov_words = original.oov_words;
  return p;
}

double evaluate_batch_loss(const KeyphraseModel& model, const Batch& batch,
                           std::span<const EncodedPair> pairs) {
  double total = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    total += evaluate_pair_loss(model, unpad_row(batch, r, pairs));
  }
  return total;
}

}  // namespace kpgen
