#include "kpgen/training/trainer.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "json.hpp"
#include "kpgen/errors.hpp"
#include "kpgen/numerics/adam.hpp"
#include "kpgen/numerics/ops.hpp"

namespace kpgen {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(clip_threshold > 0.0)) throw ConfigError("clip_threshold must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (validation_interval < 1) throw ConfigError("validation_interval must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

bool EarlyStopping::update(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_rounds_ = 0;
    return true;
  }
  ++bad_rounds_;
  return false;
}

std::string to_jsonl(const ValidationRecord& r) {
  nlohmann::ordered_json j{{"step", r.step},
                           {"epoch", r.epoch},
                           {"train_loss", r.train_loss},
                           {"val_loss", r.val_loss},
                           {"lr", r.learning_rate},
                           {"clipped_fraction", r.clipped_fraction}};
  return j.dump();
}

std::string to_string(StopReason r) {
  return r == StopReason::kEarlyStopping ? "early_stopping" : "max_epochs";
}

namespace {

// Runs fn(chunk, begin, end) over `workers` contiguous chunks of [0, n).
template <typename Fn>
void run_chunks(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  auto bounds = [&](std::size_t w) { return n * w / workers; };
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        fn(w, bounds(w), bounds(w + 1));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::mt19937_64 pair_rng(std::uint64_t seed, std::uint64_t step, std::uint64_t row) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32)};
  return std::mt19937_64(seq);
}

std::size_t token_count(std::span<const EncodedPair> pairs) {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.target_ids.size();
  return n;
}

}  // namespace

double mean_token_loss(const KeyphraseModel& model, std::span<const EncodedPair> pairs,
                       std::size_t workers) {
  if (pairs.empty()) throw UsageError("mean_token_loss: no pairs");
  std::vector<double> partial(std::max<std::size_t>(1, std::min(workers, pairs.size())), 0.0);
  run_chunks(pairs.size(), partial.size(), [&](std::size_t w, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) partial[w] += evaluate_pair_loss(model, pairs[i]);
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total / static_cast<double>(token_count(pairs));
}

double batch_gradients(const KeyphraseModel& model, const Batch& batch,
                       std::span<const EncodedPair> pairs, std::span<Gradients> worker_grads,
                       std::uint64_t seed, std::uint64_t step) {
  if (worker_grads.empty()) throw UsageError("batch_gradients: no gradient buffers");
  const std::size_t workers = std::min(worker_grads.size(), batch.rows());
  std::vector<double> partial(workers, 0.0);
  run_chunks(batch.rows(), workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      EncodedPair pair = unpad_row(batch, r, pairs);
      auto rng = pair_rng(seed, step, r);
      ForwardOptions opts{true, &rng};
      try {
        Tape tape;
        Var loss = pair_loss(tape, model, pair, opts);
        partial[w] += tape.value(loss)[0];
        tape.backward(loss, worker_grads[w]);
      } catch (const NumericError& e) {
        throw NumericError("pair " + std::to_string(batch.indices[r]) + ": " + e.what());
      }
    }
  });
  for (std::size_t w = 1; w < workers; ++w) accumulate(worker_grads[0], worker_grads[w]);
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

TrainResult train(std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> valid_pairs,
                  const Vocabulary& vocab, const ModelConfig& model_config,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  ModelConfig mc = model_config;
  mc.dropout_rate = config.dropout_rate;
  std::mt19937_64 init_rng(config.seed);
  return train(train_pairs, valid_pairs, vocab, KeyphraseModel::initialize(mc, init_rng), config,
               options);
}

TrainResult train(std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> valid_pairs,
                  const Vocabulary& vocab, KeyphraseModel initial, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (train_pairs.empty()) throw UsageError("train: no training pairs");
  if (valid_pairs.empty()) throw UsageError("train: no validation pairs");
  if (initial.config().vocab_size != vocab.size()) {
    throw ConfigError("model vocab_size " + std::to_string(initial.config().vocab_size) +
                      " does not match the vocabulary size " + std::to_string(vocab.size()));
  }
  ModelConfig mc = initial.config();
  mc.dropout_rate = config.dropout_rate;
  KeyphraseModel model(mc, std::move(initial.params()));

  AdamState adam = make_adam_state(model.params(), AdamConfig{config.learning_rate});
  std::vector<Gradients> worker_grads(config.workers, model.params().zeros_like());
  std::mt19937_64 shuffle_rng(config.seed);
  EarlyStopping stopper(config.patience);

  TrainResult result{Checkpoint{model, vocab, {0, 0, std::numeric_limits<double>::infinity(), config.seed}},
                     {}, 0, 0, StopReason::kMaxEpochs};
  double window_loss = 0.0;
  std::size_t window_tokens = 0, window_steps = 0, window_clipped = 0;
  std::uint64_t step = 0, epoch = 0;
  bool validated_last = false;

  auto validate = [&] {
    ValidationRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.train_loss = window_tokens ? window_loss / static_cast<double>(window_tokens) : 0.0;
    rec.val_loss = mean_token_loss(model, valid_pairs, config.workers);
    rec.learning_rate = config.learning_rate;
    rec.clipped_fraction =
        window_steps ? static_cast<double>(window_clipped) / static_cast<double>(window_steps) : 0.0;
    window_loss = 0.0;
    window_tokens = window_steps = window_clipped = 0;
    result.history.push_back(rec);
    if (options.log) *options.log << to_jsonl(rec) << '\n' << std::flush;
    if (options.on_validation) options.on_validation(rec);
    if (stopper.update(rec.val_loss)) {
      result.best = Checkpoint{model, vocab, {epoch, step, rec.val_loss, config.seed}};
      if (options.checkpoint) save_checkpoint(result.best, *options.checkpoint);
    }
    validated_last = true;
  };

  while (epoch < config.max_epochs && !stopper.should_stop()) {
    ++epoch;
    auto batches = make_batches(train_pairs, config.batch_size, shuffle_rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      for (auto& g : worker_grads) zero_gradients(g);
      ClipResult clip;
      double loss = 0.0;
      try {
        loss = batch_gradients(model, batches[b], train_pairs, worker_grads, config.seed, step);
        clip = clip_gradients(worker_grads[0], config.clip_threshold);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           " (step " + std::to_string(step + 1) + "): " + e.what());
      }
      adam_step(model.params(), worker_grads[0], adam);
      ++step;
      validated_last = false;
      window_loss += loss;
      window_tokens += batches[b].target_tokens();
      ++window_steps;
      if (clip.clipped) ++window_clipped;
      if (step % config.validation_interval == 0) {
        validate();
        if (stopper.should_stop()) break;
      }
    }
  }
  if (!validated_last) validate();
  result.steps = step;
  result.epochs = epoch;
  result.stop_reason = stopper.should_stop() ? StopReason::kEarlyStopping : StopReason::kMaxEpochs;
  return result;
}

}  // namespace kpgen
