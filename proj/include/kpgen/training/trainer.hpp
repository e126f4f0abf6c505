#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kpgen/model/model.hpp"
#include "kpgen/training/batching.hpp"
#include "kpgen/training/checkpoint.hpp"

namespace kpgen {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  double clip_threshold = 0.1;
  double dropout_rate = 0.5;  // copied into the model config for training
  std::size_t max_epochs = 10;
  std::size_t patience = 3;  // validations without improvement before stopping
  std::size_t validation_interval = 1000;  // optimizer steps between validations
  std::uint64_t seed = 1;
  // Threads computing per-pair gradients. Results are deterministic for a
  // fixed worker count; different counts can differ in the last bits.
  std::size_t workers = 1;

  // Throws ConfigError.
  void validate() const;
};

/// Stops after `patience` consecutive validations without a new best loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  // Returns true when `loss` is a new best.
  bool update(double loss);
  bool should_stop() const { return bad_rounds_ >= patience_; }
  double best() const { return best_; }
  std::size_t rounds_since_best() const { return bad_rounds_; }

 private:
  std::size_t patience_;
  std::size_t bad_rounds_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct ValidationRecord {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double train_loss = 0.0;  // nats per target token over the steps since the previous record
  double val_loss = 0.0;    // nats per target token
  double learning_rate = 0.0;
  double clipped_fraction = 0.0;  // share of those steps whose gradient was clipped
};

std::string to_jsonl(const ValidationRecord& record);

/// Mean negative log-likelihood per target token (no dropout).
double mean_token_loss(const KeyphraseModel& model, std::span<const EncodedPair> pairs,
                       std::size_t workers = 1);

/// Per-pair forward/backward with dropout for one batch. Rows are split into
/// one contiguous chunk per entry of `worker_grads` (each run on its own
/// thread when there are several); chunks are summed in order into
/// worker_grads[0]. Per-pair dropout streams derive from (seed, step, row).
/// Returns the summed loss; throws NumericError naming the pair on failure.
double batch_gradients(const KeyphraseModel& model, const Batch& batch,
                       std::span<const EncodedPair> pairs, std::span<Gradients> worker_grads,
                       std::uint64_t seed, std::uint64_t step);

struct TrainOptions {
  std::ostream* log = nullptr;                     // JSON-lines validation records
  std::optional<std::filesystem::path> checkpoint;  // rewritten on each new best
  std::function<void(const ValidationRecord&)> on_validation;
};

enum class StopReason { kEarlyStopping, kMaxEpochs };
std::string to_string(StopReason r);

struct TrainResult {
  Checkpoint best;
  std::vector<ValidationRecord> history;
  std::uint64_t steps = 0;
  std::uint64_t epochs = 0;
  StopReason stop_reason = StopReason::kMaxEpochs;
};

/// Teacher-forced training with Adam and global-norm clipping; returns the
/// parameters with the lowest validation loss. A final validation runs when
/// the last step was not followed by one.
TrainResult train(std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> valid_pairs,
                  const Vocabulary& vocab, const ModelConfig& model_config,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Same, continuing from existing parameters.
TrainResult train(std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> valid_pairs,
                  const Vocabulary& vocab, KeyphraseModel initial, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace kpgen
