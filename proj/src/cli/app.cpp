#include "kpgen/cli/app.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpgen/cli/commands.hpp"
#include "kpgen/errors.hpp"

namespace kpgen::cli {

namespace {

// A command-line flag that sets one RunConfig key.
struct KeyFlag {
  const char* flag;
  const char* key;
  const char* help;
  bool optional_value = false;  // "--copy" alone means true
};

const std::vector<KeyFlag> kCommonFlags = {
    {"--seed", "run.seed", "random seed"},
    {"--workers", "run.workers", "worker threads"},
};
const std::vector<KeyFlag> kPreprocessFlags = {
    {"--vocab-size", "preprocess.vocab_size", "ordinary words kept in the vocabulary"},
    {"--valid-fraction", "preprocess.valid_fraction", "share of documents held out for validation"},
};
const std::vector<KeyFlag> kTrainFlags = {
    {"--embedding-dim", "model.embedding_dim", "word embedding size"},
    {"--hidden-dim", "model.hidden_dim", "GRU state size"},
    {"--copy", "model.copy", "enable the copy mechanism (true/false)", true},
    {"--batch-size", "train.batch_size", "pairs per batch"},
    {"--lr", "train.learning_rate", "Adam learning rate"},
    {"--clip", "train.clip_threshold", "global gradient norm threshold"},
    {"--dropout", "train.dropout_rate", "dropout rate"},
    {"--patience", "train.patience", "validations without improvement before stopping"},
    {"--max-epochs", "train.max_epochs", "epoch limit"},
    {"--validation-interval", "train.validation_interval", "optimizer steps between validations"},
};
const std::vector<KeyFlag> kPredictFlags = {
    {"--beam-size", "beam.beam_size", "beam width"},
    {"--max-depth", "beam.max_depth", "maximum decoding steps"},
    {"--top-k", "beam.top_k", "phrases kept per document"},
};
const std::vector<KeyFlag> kEvalFlags = {
    {"--ks", "eval.ks", "comma-separated cutoffs"},
    {"--match-mode", "eval.match_mode", "stemmed or raw source matching"},
    {"--recall-mode", "eval.recall_mode", "gold or records recall normalization"},
};
const std::vector<KeyFlag> kStatsFlags = {
    {"--match-mode", "eval.match_mode", "stemmed or raw source matching"},
};

struct Overrides {
  std::optional<std::string> config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;  // flag -> value
  std::vector<std::pair<const KeyFlag*, CLI::Option*>> options;
};

void add_flags(CLI::App* cmd, const std::vector<KeyFlag>& flags, Overrides& ov) {
  for (const auto& f : flags) {
    auto* opt = cmd->add_option(f.flag, ov.values[f.flag], f.help);
    if (f.optional_value) opt->expected(0, 1);
    ov.options.emplace_back(&f, opt);
  }
}

void add_common(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_file, "key-value config file");
  cmd->add_option("--set", ov.sets, "override any config key: section.key=value");
  add_flags(cmd, kCommonFlags, ov);
}

RunConfig effective_config(const Overrides& ov) {
  RunConfig config;
  if (ov.config_file) config.load_file(*ov.config_file);
  for (const auto& [flag, opt] : ov.options) {
    if (opt->count() == 0) continue;
    std::string value = ov.values.at(flag->flag);
    if (flag->optional_value && value.empty()) value = "true";
    config.set(flag->key, value);
  }
  for (const auto& s : ov.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
    config.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return config;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keyphrase generation with an attentive encoder-decoder and a copy mechanism", "kpgen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", KPGEN_VERSION);

  Overrides pre_ov, train_ov, pred_ov, eval_ov, stats_ov;
  PreprocessArgs pre;
  TrainArgs tr;
  PredictArgs pred;
  EvalArgs ev;
  StatsArgs st;
  std::string pre_valid, tr_init, pred_dataset;

  auto* c_pre = app.add_subcommand("preprocess", "tokenize a corpus, build the vocabulary, encode pairs");
  c_pre->add_option("--input", pre.input, "corpus (JSON lines)")->required();
  c_pre->add_option("--valid-input", pre_valid, "separate validation corpus");
  c_pre->add_option("--output", pre.output, "dataset directory")->required();
  add_common(c_pre, pre_ov);
  add_flags(c_pre, kPreprocessFlags, pre_ov);

  auto* c_train = app.add_subcommand("train", "train a model on a preprocessed dataset");
  c_train->add_option("--input", tr.input, "dataset directory from preprocess")->required();
  c_train->add_option("--output", tr.output, "run directory")->required();
  c_train->add_option("--init-checkpoint", tr_init, "continue from this checkpoint");
  add_common(c_train, train_ov);
  add_flags(c_train, kTrainFlags, train_ov);

  auto* c_pred = app.add_subcommand("predict", "generate ranked keyphrases with beam search");
  c_pred->add_option("--input", pred.input, "corpus (JSON lines)")->required();
  c_pred->add_option("--model", pred.model, "checkpoint file")->required();
  c_pred->add_option("--output", pred.output, "output directory")->required();
  c_pred->add_option("--dataset", pred_dataset, "dataset directory whose vocabulary must match");
  add_common(c_pred, pred_ov);
  add_flags(c_pred, kPredictFlags, pred_ov);

  auto* c_eval = app.add_subcommand("eval", "score predictions against gold keyphrases");
  c_eval->add_option("--input", ev.input, "predictions (JSON lines)")->required();
  c_eval->add_option("--gold", ev.gold, "gold corpus (JSON lines)")->required();
  c_eval->add_option("--output", ev.output, "output directory")->required();
  add_common(c_eval, eval_ov);
  add_flags(c_eval, kEvalFlags, eval_ov);

  auto* c_stats = app.add_subcommand("stats", "present/absent keyphrase proportions");
  c_stats->add_option("--input", st.inputs, "corpora (JSON lines)")->required();
  c_stats->add_option("--output", st.output, "output directory")->required();
  add_common(c_stats, stats_ov);
  add_flags(c_stats, kStatsFlags, stats_ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  Console console{out, err};
  try {
    if (c_pre->parsed()) {
      if (!pre_valid.empty()) pre.valid_input = pre_valid;
      cmd_preprocess(pre, effective_config(pre_ov), console);
    } else if (c_train->parsed()) {
      if (!tr_init.empty()) tr.init_checkpoint = tr_init;
      cmd_train(tr, effective_config(train_ov), console);
    } else if (c_pred->parsed()) {
      if (!pred_dataset.empty()) pred.dataset = pred_dataset;
      cmd_predict(pred, effective_config(pred_ov), console);
    } else if (c_eval->parsed()) {
      cmd_eval(ev, effective_config(eval_ov), console);
    } else if (c_stats->parsed()) {
      cmd_stats(st, effective_config(stats_ov), console);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace kpgen::cli
