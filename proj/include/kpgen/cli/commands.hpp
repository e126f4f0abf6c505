#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kpgen/cli/run_config.hpp"

namespace kpgen::cli {

namespace fs = std::filesystem;

/// Where a command logs progress and warnings.
struct Console {
  std::ostream& out;
  std::ostream& err;
};

// Dataset directory layout written by preprocess and read by train.
inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kTrainFile = "train.jsonl";
inline constexpr const char* kValidFile = "valid.jsonl";
inline constexpr const char* kStatsFile = "stats.json";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kPredictionsFile = "predictions.jsonl";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kReportTableFile = "report.txt";

void write_vocabulary(const Vocabulary& vocab, const fs::path& path);
Vocabulary read_vocabulary(const fs::path& path);

struct DatasetPair {
  std::string document;
  EncodedPair pair;
};
void write_pairs(const std::vector<DatasetPair>& pairs, const fs::path& path);
std::vector<DatasetPair> read_pairs(const fs::path& path);

/// FNV-1a 64 over the file's bytes.
std::uint64_t hash_file(const fs::path& path);

struct PreprocessArgs {
  fs::path input;
  std::optional<fs::path> valid_input;
  fs::path output;
};
void cmd_preprocess(const PreprocessArgs& args, const RunConfig& config, const Console& console);

struct TrainArgs {
  fs::path input;  // preprocess output directory
  fs::path output;
  std::optional<fs::path> init_checkpoint;
};
void cmd_train(const TrainArgs& args, const RunConfig& config, const Console& console);

struct PredictArgs {
  fs::path input;  // corpus JSON lines
  fs::path model;
  fs::path output;
  // When given, the dataset's vocabulary must be the checkpoint's.
  std::optional<fs::path> dataset;
};
void cmd_predict(const PredictArgs& args, const RunConfig& config, const Console& console);

struct EvalArgs {
  fs::path input;  // predictions JSON lines
  fs::path gold;   // corpus JSON lines
  fs::path output;
};
void cmd_eval(const EvalArgs& args, const RunConfig& config, const Console& console);

struct StatsArgs {
  std::vector<fs::path> inputs;
  fs::path output;
};
void cmd_stats(const StatsArgs& args, const RunConfig& config, const Console& console);

}  // namespace kpgen::cli
