#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "kpgen/model/model.hpp"
#include "kpgen/textproc/vocabulary.hpp"

namespace kpgen {

struct TrainingMetadata {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  double best_validation_loss = 0.0;  // nats per target token
  std::uint64_t seed = 0;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct Checkpoint {
  KeyphraseModel model;
  Vocabulary vocabulary;
  TrainingMetadata metadata;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind {
    kIo,         // cannot open, read or write
    kVersion,    // wrong magic or unsupported format version
    kTruncated,  // file ends before the declared content
    kShape,      // array directory disagrees with the model config
    kMalformed,  // header JSON unreadable or incomplete
  };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kCheckpointMagic[8] = {'K', 'P', 'G', 'E', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: 8-byte magic, uint32 version, uint64 header length, header JSON
/// (config, vocabulary, array directory, metadata), then every parameter
/// array as little-endian float32 in slot order. All integers little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it over `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& config);
/// Throws ConfigError on missing or mistyped fields.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Rounds every parameter to float32, the precision checkpoints store.
ParamStore round_to_float(const ParamStore& params);

}  // namespace kpgen
