#include "kpgen/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "kpgen/errors.hpp"

namespace kpgen::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"preprocess.vocab_size", [](RunConfig& c, auto& k, auto& v) { c.vocab_size = parse_size(k, v); }},
      {"preprocess.valid_fraction",
       [](RunConfig& c, auto& k, auto& v) { c.valid_fraction = parse_double(k, v); }},
      {"preprocess.count_keyphrases",
       [](RunConfig& c, auto& k, auto& v) { c.count_keyphrases = parse_bool(k, v); }},
      {"model.embedding_dim",
       [](RunConfig& c, auto& k, auto& v) { c.model.embedding_dim = parse_size(k, v); }},
      {"model.hidden_dim", [](RunConfig& c, auto& k, auto& v) { c.model.hidden_dim = parse_size(k, v); }},
      {"model.copy", [](RunConfig& c, auto& k, auto& v) { c.model.copy_enabled = parse_bool(k, v); }},
      {"model.init_range", [](RunConfig& c, auto& k, auto& v) { c.model.init_range = parse_double(k, v); }},
      {"model.share_embeddings",
       [](RunConfig& c, auto& k, auto& v) { c.model.share_embeddings = parse_bool(k, v); }},
      {"model.copy_activation",
       [](RunConfig& c, auto&, auto& v) { c.model.copy_activation = parse_copy_activation(v); }},
      {"model.dropout_on_embeddings",
       [](RunConfig& c, auto& k, auto& v) { c.model.dropout_on_embeddings = parse_bool(k, v); }},
      {"model.dropout_on_output",
       [](RunConfig& c, auto& k, auto& v) { c.model.dropout_on_output = parse_bool(k, v); }},
      {"train.batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = parse_size(k, v); }},
      {"train.learning_rate",
       [](RunConfig& c, auto& k, auto& v) { c.train.learning_rate = parse_double(k, v); }},
      {"train.clip_threshold",
       [](RunConfig& c, auto& k, auto& v) { c.train.clip_threshold = parse_double(k, v); }},
      {"train.dropout_rate",
       [](RunConfig& c, auto& k, auto& v) { c.train.dropout_rate = parse_double(k, v); }},
      {"train.max_epochs", [](RunConfig& c, auto& k, auto& v) { c.train.max_epochs = parse_size(k, v); }},
      {"train.patience", [](RunConfig& c, auto& k, auto& v) { c.train.patience = parse_size(k, v); }},
      {"train.validation_interval",
       [](RunConfig& c, auto& k, auto& v) { c.train.validation_interval = parse_size(k, v); }},
      {"beam.beam_size", [](RunConfig& c, auto& k, auto& v) { c.beam.beam_size = parse_size(k, v); }},
      {"beam.max_depth", [](RunConfig& c, auto& k, auto& v) { c.beam.max_depth = parse_size(k, v); }},
      {"beam.top_k", [](RunConfig& c, auto& k, auto& v) { c.beam.max_phrases = parse_size(k, v); }},
      {"eval.ks", [](RunConfig& c, auto& k, auto& v) { c.eval.ks = parse_sizes(k, v); }},
      {"eval.match_mode", [](RunConfig& c, auto&, auto& v) { c.eval.presence_mode = parse_match_mode(v); }},
      {"eval.recall_mode", [](RunConfig& c, auto&, auto& v) { c.eval.recall_mode = parse_recall_mode(v); }},
      {"run.seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = parse_u64(k, v); }},
      {"run.workers", [](RunConfig& c, auto& k, auto& v) { c.train.workers = parse_size(k, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, trim(value));
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto where = origin + ":" + std::to_string(number);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

nlohmann::ordered_json RunConfig::to_json() const {
  return {{"preprocess",
           {{"vocab_size", vocab_size},
            {"valid_fraction", valid_fraction},
            {"count_keyphrases", count_keyphrases}}},
          {"model",
           {{"embedding_dim", model.embedding_dim},
            {"hidden_dim", model.hidden_dim},
            {"copy", model.copy_enabled},
            {"init_range", model.init_range},
            {"share_embeddings", model.share_embeddings},
            {"copy_activation", to_string(model.copy_activation)},
            {"dropout_on_embeddings", model.dropout_on_embeddings},
            {"dropout_on_output", model.dropout_on_output}}},
          {"train",
           {{"batch_size", train.batch_size},
            {"learning_rate", train.learning_rate},
            {"clip_threshold", train.clip_threshold},
            {"dropout_rate", train.dropout_rate},
            {"max_epochs", train.max_epochs},
            {"patience", train.patience},
            {"validation_interval", train.validation_interval}}},
          {"beam", {{"beam_size", beam.beam_size}, {"max_depth", beam.max_depth}, {"top_k", beam.max_phrases}}},
          {"eval",
           {{"ks", eval.ks},
            {"match_mode", to_string(eval.presence_mode)},
            {"recall_mode", to_string(eval.recall_mode)}}},
          {"run", {{"seed", train.seed}, {"workers", train.workers}}}};
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

}  // namespace kpgen::cli
