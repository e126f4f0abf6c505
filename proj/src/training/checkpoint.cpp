#include "kpgen/training/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "kpgen/errors.hpp"

namespace kpgen {

using nlohmann::json;

json model_config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},
              {"embedding_dim", c.embedding_dim},
              {"hidden_dim", c.hidden_dim},
              {"copy_enabled", c.copy_enabled},
              {"dropout_rate", c.dropout_rate},
              {"init_range", c.init_range},
              {"share_embeddings", c.share_embeddings},
              {"copy_activation", to_string(c.copy_activation)},
              {"dropout_on_embeddings", c.dropout_on_embeddings},
              {"dropout_on_output", c.dropout_on_output}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.copy_enabled = j.at("copy_enabled").get<bool>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.init_range = j.at("init_range").get<double>();
    c.share_embeddings = j.at("share_embeddings").get<bool>();
    c.copy_activation = parse_copy_activation(j.at("copy_activation").get<std::string>());
    c.dropout_on_embeddings = j.at("dropout_on_embeddings").get<bool>();
    c.dropout_on_output = j.at("dropout_on_output").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ParamStore round_to_float(const ParamStore& params) {
  ParamStore out = params;
  for (std::size_t s = 0; s < out.size(); ++s) {
    for (double& v : out[s].values()) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t pos) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return value;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

constexpr std::size_t kPreamble = sizeof(kCheckpointMagic) + 4 + 8;

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& params = ckpt.model.params();
  json arrays = json::array();
  std::uint64_t offset = 0;
  for (std::size_t s = 0; s < params.size(); ++s) {
    arrays.push_back({{"name", params.name(s)},
                      {"shape", params[s].shape()},
                      {"offset", offset},
                      {"count", params[s].size()}});
    offset += params[s].size();
  }
  const auto vw = ckpt.vocabulary.words();
  json words = std::vector<std::string>(vw.begin(), vw.end());
  json best = std::isfinite(ckpt.metadata.best_validation_loss)
                  ? json(ckpt.metadata.best_validation_loss)
                  : json(nullptr);
  json header{{"format", "kpgen-checkpoint"},
              {"model", model_config_to_json(ckpt.model.config())},
              {"vocabulary", std::move(words)},
              {"vocabulary_fingerprint", hex64(ckpt.vocabulary.fingerprint())},
              {"arrays", std::move(arrays)},
              {"dtype", "float32-le"},
              {"metadata",
               {{"epoch", ckpt.metadata.epoch},
                {"step", ckpt.metadata.step},
                {"best_validation_loss", best},
                {"seed", ckpt.metadata.seed}}}};
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + 4 * offset);
  for (std::size_t s = 0; s < params.size(); ++s) {
    for (double v : params[s].values()) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError(Kind::kVersion, "not a kpgen checkpoint (bad magic)");
  }
  if (bytes.size() < kPreamble) throw CheckpointError(Kind::kTruncated, "checkpoint preamble truncated");
  const auto version = get_le<std::uint32_t>(bytes, sizeof(kCheckpointMagic));
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersion, "unsupported checkpoint version " + std::to_string(version) +
                                              " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(bytes, sizeof(kCheckpointMagic) + 4);
  if (header_len > bytes.size() - kPreamble) {
    throw CheckpointError(Kind::kTruncated, "checkpoint header truncated");
  }

  json header;
  ModelConfig config;
  std::vector<std::string> words;
  TrainingMetadata meta;
  std::string fingerprint;
  try {
    header = json::parse(bytes.begin() + kPreamble,
                         bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len));
    config = model_config_from_json(header.at("model"));
    words = header.at("vocabulary").get<std::vector<std::string>>();
    fingerprint = header.at("vocabulary_fingerprint").get<std::string>();
    const auto& m = header.at("metadata");
    meta.epoch = m.at("epoch").get<std::uint64_t>();
    meta.step = m.at("step").get<std::uint64_t>();
    meta.best_validation_loss = m.at("best_validation_loss").is_null()
                                    ? std::numeric_limits<double>::infinity()
                                    : m.at("best_validation_loss").get<double>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    if (header.at("dtype") != "float32-le") throw CheckpointError(Kind::kMalformed, "unknown dtype");
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint header: ") + e.what());
  }

  Vocabulary vocab(std::move(words));
  if (hex64(vocab.fingerprint()) != fingerprint) {
    throw CheckpointError(Kind::kMalformed, "vocabulary fingerprint mismatch");
  }
  if (vocab.size() != config.vocab_size) {
    throw CheckpointError(Kind::kShape, "vocabulary has " + std::to_string(vocab.size()) +
                                            " entries but the model expects " +
                                            std::to_string(config.vocab_size));
  }

  const auto expected = KeyphraseModel::layout(config);
  const auto arrays = header.value("arrays", json());
  if (!arrays.is_array() || arrays.size() != expected.size()) {
    throw CheckpointError(Kind::kShape, "array directory does not match the model layout");
  }
  std::uint64_t total = 0;
  for (std::size_t s = 0; s < expected.size(); ++s) {
    const auto& a = arrays[s];
    Shape shape;
    try {
      shape = a.at("shape").get<Shape>();
      if (a.at("name").get<std::string>() != expected[s].first || shape != expected[s].second ||
          a.at("offset").get<std::uint64_t>() != total ||
          a.at("count").get<std::uint64_t>() != shape_size(shape)) {
        throw CheckpointError(Kind::kShape, "array " + std::to_string(s) + " (" + expected[s].first +
                                                ") does not match the model layout");
      }
    } catch (const json::exception& e) {
      throw CheckpointError(Kind::kMalformed, std::string("array directory: ") + e.what());
    }
    total += shape_size(shape);
  }
  const std::size_t data_start = kPreamble + header_len;
  if (bytes.size() - data_start < 4 * total) {
    throw CheckpointError(Kind::kTruncated, "checkpoint data truncated: expected " +
                                                std::to_string(4 * total) + " bytes, found " +
                                                std::to_string(bytes.size() - data_start));
  }
  if (bytes.size() - data_start > 4 * total) {
    throw CheckpointError(Kind::kMalformed, "trailing bytes after checkpoint data");
  }

  ParamStore params;
  std::size_t pos = data_start;
  for (const auto& [name, shape] : expected) {
    Tensor t(shape);
    for (double& v : t.values()) {
      v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
      pos += 4;
    }
    params.add(name, std::move(t));
  }
  try {
    return Checkpoint{KeyphraseModel(config, std::move(params)), std::move(vocab), meta};
  } catch (const NumericError& e) {
    throw CheckpointError(Kind::kMalformed, e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw CheckpointError(CheckpointError::Kind::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError(CheckpointError::Kind::kIo, "cannot move checkpoint into " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace kpgen
