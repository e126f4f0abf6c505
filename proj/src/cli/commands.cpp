#include "kpgen/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "kpgen/errors.hpp"
#include "kpgen/textproc/corpus.hpp"
#include "kpgen/textproc/partition.hpp"
#include "kpgen/training/checkpoint.hpp"

#ifndef KPGEN_VERSION
#define KPGEN_VERSION "unknown"
#endif

namespace kpgen::cli {

using ojson = nlohmann::ordered_json;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    auto out = open_output(tmp);
    out << text;
    if (!out.flush()) throw UsageError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
}

ojson describe_input(const fs::path& path) {
  if (fs::is_directory(path)) {
    ojson files = ojson::array();
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file()) entries.push_back(e.path());
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries) {
      files.push_back({{"name", p.filename().string()}, {"fnv1a64", hex64(hash_file(p))}});
    }
    return {{"path", path.string()}, {"files", files}};
  }
  return {{"path", path.string()},
          {"bytes", fs::file_size(path)},
          {"fnv1a64", hex64(hash_file(path))}};
}

// Inputs are described before the command writes anything, so a command that
// reads its own output directory still records what it started from.
ojson describe_inputs(const std::vector<fs::path>& inputs) {
  ojson out = ojson::array();
  for (const auto& p : inputs) out.push_back(describe_input(p));
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                    ojson inputs, const std::vector<std::string>& outputs, ojson summary) {
  ojson m{{"command", command},
          {"version", KPGEN_VERSION},
          {"config", config.to_json()},
          {"inputs", std::move(inputs)},
          {"outputs", outputs},
          {"summary", std::move(summary)}};
  write_text(dir / kManifestFile, m.dump(2) + "\n");
}

std::vector<Document> load_corpus(const fs::path& path, const Console& console) {
  if (!fs::exists(path)) throw UsageError("input not found: " + path.string());
  auto result = read_corpus_file(path.string());
  if (result.malformed_lines > 0) {
    console.err << "warning: " << path.string() << ": skipped " << result.malformed_lines
                << " malformed line(s)";
    if (!result.malformed_line_numbers.empty()) {
      console.err << " (first at line " << result.malformed_line_numbers.front() << ")";
    }
    console.err << '\n';
  }
  if (result.documents.empty()) throw UsageError("no usable documents in " + path.string());
  return std::move(result.documents);
}

// Runs fn(i) for i in [0, n) on `workers` threads, each taking a contiguous block.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = n * w / workers; i < n * (w + 1) / workers; ++i) fn(i);
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

}  // namespace

std::uint64_t hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void write_vocabulary(const Vocabulary& vocab, const fs::path& path) {
  std::string text;
  for (const auto& w : vocab.words()) text += w + "\n";
  write_text(path, text);
}

Vocabulary read_vocabulary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read vocabulary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) words.push_back(line);
  }
  return Vocabulary(std::move(words));
}

void write_pairs(const std::vector<DatasetPair>& pairs, const fs::path& path) {
  std::string text;
  for (const auto& [doc, p] : pairs) {
    ojson j{{"doc", doc},
            {"source", p.source_ids},
            {"source_extended", p.source_extended_ids},
            {"oov", p.oov_words},
            {"target", p.target_ids}};
    text += j.dump() + "\n";
  }
  write_text(path, text);
}

std::vector<DatasetPair> read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::vector<DatasetPair> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      DatasetPair d;
      d.document = j.at("doc").get<std::string>();
      d.pair.source_ids = j.at("source").get<std::vector<TokenId>>();
      d.pair.source_extended_ids = j.at("source_extended").get<std::vector<TokenId>>();
      d.pair.oov_words = j.at("oov").get<std::vector<std::string>>();
      d.pair.target_ids = j.at("target").get<std::vector<TokenId>>();
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void cmd_preprocess(const PreprocessArgs& args, const RunConfig& config, const Console& console) {
  if (config.vocab_size < 1) throw ConfigError("vocab_size must be at least 1");
  if (!(config.valid_fraction >= 0.0 && config.valid_fraction < 1.0)) {
    throw ConfigError("valid_fraction must be in [0, 1)");
  }
  std::vector<fs::path> input_paths{args.input};
  if (args.valid_input) input_paths.push_back(*args.valid_input);
  ojson inputs = describe_inputs(input_paths);

  std::vector<Document> train_docs = load_corpus(args.input, console), valid_docs;
  if (args.valid_input) {
    valid_docs = load_corpus(*args.valid_input, console);
  } else if (config.valid_fraction > 0.0 && train_docs.size() > 1) {
    std::vector<std::size_t> order(train_docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.train.seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_valid = static_cast<std::size_t>(
        std::llround(config.valid_fraction * static_cast<double>(train_docs.size())));
    n_valid = std::clamp<std::size_t>(n_valid, 1, train_docs.size() - 1);
    std::vector<bool> is_valid(train_docs.size(), false);
    for (std::size_t i = 0; i < n_valid; ++i) is_valid[order[i]] = true;
    std::vector<Document> kept;
    for (std::size_t i = 0; i < train_docs.size(); ++i) {
      (is_valid[i] ? valid_docs : kept).push_back(std::move(train_docs[i]));
    }
    train_docs = std::move(kept);
  }

  const Vocabulary vocab =
      build_vocabulary(train_docs, VocabularyOptions{config.vocab_size, config.count_keyphrases});

  struct SplitStats {
    std::size_t documents = 0, pairs = 0, without_keyphrases = 0, without_text = 0, oov_keyphrases = 0;
  };
  auto encode_split = [&](const std::vector<Document>& docs, SplitStats& st) {
    std::vector<DatasetPair> out;
    for (const auto& doc : docs) {
      ++st.documents;
      if (doc.keyphrases.empty()) {
        ++st.without_keyphrases;
        continue;
      }
      if (source_tokens(doc).empty()) {
        ++st.without_text;
        continue;
      }
      for (const auto& tp : split_pairs(doc)) {
        if (tp.target.empty()) continue;
        EncodedPair p = encode_pair(tp.source, tp.target, vocab);
        const bool oov = std::any_of(tp.target.begin(), tp.target.end(),
                                     [&](const std::string& w) { return !vocab.contains(w); });
        st.oov_keyphrases += oov;
        ++st.pairs;
        out.push_back({doc.id, std::move(p)});
      }
    }
    return out;
  };
  SplitStats train_stats, valid_stats;
  const auto train_pairs = encode_split(train_docs, train_stats);
  const auto valid_pairs = encode_split(valid_docs, valid_stats);
  if (train_pairs.empty()) throw UsageError("no training pairs: no document has both text and keyphrases");

  ensure_directory(args.output);
  write_vocabulary(vocab, args.output / kVocabFile);
  write_pairs(train_pairs, args.output / kTrainFile);
  write_pairs(valid_pairs, args.output / kValidFile);

  auto split_json = [](const SplitStats& s) {
    return ojson{{"documents", s.documents},
                 {"documents_without_keyphrases", s.without_keyphrases},
                 {"documents_without_text", s.without_text},
                 {"pairs", s.pairs},
                 {"oov_keyphrases", s.oov_keyphrases}};
  };
  const std::size_t pairs = train_stats.pairs + valid_stats.pairs;
  const std::size_t oov = train_stats.oov_keyphrases + valid_stats.oov_keyphrases;
  ojson stats{{"pairs", pairs},
              {"oov_keyphrases", oov},
              {"oov_keyphrase_rate", pairs ? static_cast<double>(oov) / static_cast<double>(pairs) : 0.0},
              {"vocabulary_size", vocab.size()},
              {"vocabulary_fingerprint", hex64(vocab.fingerprint())},
              {"train", split_json(train_stats)},
              {"valid", split_json(valid_stats)}};
  write_text(args.output / kStatsFile, stats.dump(2) + "\n");
  write_manifest(args.output, "preprocess", config, std::move(inputs),
                 {kVocabFile, kTrainFile, kValidFile, kStatsFile}, stats);

  console.out << "pairs " << pairs << " (train " << train_stats.pairs << ", valid " << valid_stats.pairs
              << "), vocabulary " << vocab.size() << " ids, keyphrases with OOV words " << oov << "/"
              << pairs << '\n';
  if (valid_pairs.empty()) {
    console.err << "warning: no validation pairs; train needs --valid-fraction or --valid-input\n";
  }
}

void cmd_train(const TrainArgs& args, const RunConfig& config, const Console& console) {
  std::vector<fs::path> input_paths{args.input};
  if (args.init_checkpoint) input_paths.push_back(*args.init_checkpoint);
  ojson inputs = describe_inputs(input_paths);

  const Vocabulary vocab = read_vocabulary(args.input / kVocabFile);
  auto unwrap = [](std::vector<DatasetPair> d) {
    std::vector<EncodedPair> out;
    out.reserve(d.size());
    for (auto& x : d) out.push_back(std::move(x.pair));
    return out;
  };
  const auto train_pairs = unwrap(read_pairs(args.input / kTrainFile));
  const auto valid_pairs = unwrap(read_pairs(args.input / kValidFile));
  if (valid_pairs.empty()) {
    throw UsageError("dataset has no validation pairs; rerun preprocess with --valid-fraction or --valid-input");
  }

  ensure_directory(args.output);
  std::ofstream log = open_output(args.output / kTrainLogFile);
  TrainOptions opts;
  opts.log = &log;
  opts.checkpoint = args.output / kCheckpointFile;
  opts.on_validation = [&](const ValidationRecord& r) {
    console.out << "step " << r.step << " epoch " << r.epoch << " train " << r.train_loss << " valid "
                << r.val_loss << '\n';
  };

  TrainResult result = [&] {
    if (args.init_checkpoint) {
      Checkpoint init = load_checkpoint(*args.init_checkpoint);
      if (!(init.vocabulary == vocab)) {
        throw ConfigError("initial checkpoint vocabulary (" + hex64(init.vocabulary.fingerprint()) +
                          ") differs from the dataset vocabulary (" + hex64(vocab.fingerprint()) + ")");
      }
      console.err << "note: model settings come from the initial checkpoint\n";
      return train(train_pairs, valid_pairs, vocab, std::move(init.model), config.train, opts);
    }
    ModelConfig mc = config.model;
    mc.vocab_size = vocab.size();
    return train(train_pairs, valid_pairs, vocab, mc, config.train, opts);
  }();
  save_checkpoint(result.best, args.output / kCheckpointFile);

  ojson summary{{"steps", result.steps},
                {"epochs", result.epochs},
                {"stop_reason", to_string(result.stop_reason)},
                {"best_step", result.best.metadata.step},
                {"best_validation_loss", result.best.metadata.best_validation_loss},
                {"model", model_config_to_json(result.best.model.config())},
                {"parameters", result.best.model.params().parameter_count()}};
  write_manifest(args.output, "train", config, std::move(inputs), {kCheckpointFile, kTrainLogFile},
                 summary);
  console.out << "stopped (" << to_string(result.stop_reason) << ") after " << result.steps
              << " steps; best validation loss " << result.best.metadata.best_validation_loss
              << " nats/token at step " << result.best.metadata.step << '\n';
}

void cmd_predict(const PredictArgs& args, const RunConfig& config, const Console& console) {
  config.beam.validate();
  ojson inputs = describe_inputs({args.input, args.model});
  const Checkpoint ckpt = load_checkpoint(args.model);
  if (args.dataset) {
    const Vocabulary dataset_vocab = read_vocabulary(*args.dataset / kVocabFile);
    if (!(dataset_vocab == ckpt.vocabulary)) {
      throw ConfigError("incompatible checkpoint: vocabulary hash " + hex64(ckpt.vocabulary.fingerprint()) +
                        " does not match dataset vocabulary hash " + hex64(dataset_vocab.fingerprint()));
    }
  }
  const auto docs = load_corpus(args.input, console);

  std::vector<Prediction> preds(docs.size());
  std::vector<char> empty(docs.size(), 0);
  parallel_for(docs.size(), config.train.workers, [&](std::size_t i) {
    if (source_tokens(docs[i]).empty()) {
      preds[i].id = docs[i].id;
      empty[i] = 1;
      return;
    }
    preds[i] = predict(ckpt.model, ckpt.vocabulary, docs[i], config.beam);
  });

  ensure_directory(args.output);
  std::string text;
  for (const auto& p : preds) text += to_jsonl(p) + "\n";
  write_text(args.output / kPredictionsFile, text);
  const auto n_empty = static_cast<std::size_t>(std::count(empty.begin(), empty.end(), 1));
  if (n_empty > 0) console.err << "warning: " << n_empty << " document(s) without text got no predictions\n";
  write_manifest(args.output, "predict", config, std::move(inputs), {kPredictionsFile},
                 {{"documents", docs.size()},
                  {"documents_without_text", n_empty},
                  {"model", model_config_to_json(ckpt.model.config())}});
  console.out << "predicted " << docs.size() << " document(s)\n";
}

void cmd_eval(const EvalArgs& args, const RunConfig& config, const Console& console) {
  ojson inputs = describe_inputs({args.input, args.gold});
  std::ifstream in(args.input);
  if (!in) throw UsageError("cannot read predictions " + args.input.string());
  const auto preds = read_predictions(in);
  const auto gold = load_corpus(args.gold, console);
  const MetricReport report = evaluate_corpus(preds, gold, config.eval);

  ensure_directory(args.output);
  write_text(args.output / kReportFile, report.to_json().dump(2) + "\n");
  write_text(args.output / kReportTableFile, report.table());
  write_manifest(args.output, "eval", config, std::move(inputs), {kReportFile, kReportTableFile},
                 report.to_json());
  if (report.missing_predictions > 0) {
    console.err << "warning: " << report.missing_predictions
                << " gold document(s) have no prediction record and score zero\n";
  }
  console.out << report.table();
}

void cmd_stats(const StatsArgs& args, const RunConfig& config, const Console& console) {
  if (args.inputs.empty()) throw UsageError("stats: no input corpus");
  ojson inputs = describe_inputs(args.inputs);
  ojson rows = ojson::array();
  std::ostringstream table;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %8s %12s %10s %10s\n", "Dataset", "#Docs", "#Keyphrases",
                "Present%", "Absent%");
  table << buf;
  for (const auto& path : args.inputs) {
    const auto docs = load_corpus(path, console);
    const PresenceStats s = presence_stats(docs, config.eval.presence_mode);
    rows.push_back({{"input", path.string()},
                    {"documents", s.documents},
                    {"documents_without_keyphrases", s.skipped_documents},
                    {"keyphrases", s.keyphrases},
                    {"present", s.present},
                    {"absent", s.absent},
                    {"present_percent", 100.0 * s.present_fraction()},
                    {"absent_percent", 100.0 * s.absent_fraction()}});
    std::snprintf(buf, sizeof buf, "%-24s %8zu %12zu %10.2f %10.2f\n", path.filename().string().c_str(),
                  s.documents, s.keyphrases, 100.0 * s.present_fraction(), 100.0 * s.absent_fraction());
    table << buf;
    if (s.skipped_documents > 0) {
      console.err << "note: " << path.string() << ": " << s.skipped_documents
                  << " document(s) without keyphrases excluded\n";
    }
  }
  ensure_directory(args.output);
  ojson out{{"match_mode", to_string(config.eval.presence_mode)}, {"corpora", rows}};
  write_text(args.output / kStatsFile, out.dump(2) + "\n");
  write_manifest(args.output, "stats", config, std::move(inputs), {kStatsFile}, out);
  console.out << table.str();
}

}  // namespace kpgen::cli
