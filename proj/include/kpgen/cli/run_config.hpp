#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpgen/decoding/beam_search.hpp"
#include "kpgen/eval/metrics.hpp"
#include "kpgen/model/model.hpp"
#include "kpgen/training/trainer.hpp"

namespace kpgen::cli {

/// Every tunable setting of the pipeline, addressed as "section.key".
///
/// Config files are flat key-value text:
///
///     # comment
///     [train]
///     batch_size = 32
///     learning_rate = 1e-4
///
/// Keys outside a section must be written in full ("train.batch_size = 32").
/// Unknown keys and unparsable values are ConfigErrors. Values set later win,
/// so command-line flags applied after the file override it.
struct RunConfig {
  std::size_t vocab_size = 50000;  // ordinary words, reserved tokens excluded
  double valid_fraction = 0.0;
  bool count_keyphrases = true;
  ModelConfig model;
  TrainConfig train;
  BeamConfig beam;
  EvalOptions eval;

  void set(const std::string& key, const std::string& value);
  void load_text(const std::string& text, const std::string& origin);
  void load_file(const std::filesystem::path& path);

  nlohmann::ordered_json to_json() const;

  static std::vector<std::string> keys();
};

}  // namespace kpgen::cli
