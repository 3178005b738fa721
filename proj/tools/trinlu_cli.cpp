// trinlu: convert corpora, train, evaluate, run the ablation grid, check
// gradients and print corpus statistics.
//
// Exit codes: 0 success, 2 usage or config error, 3 data error,
// 4 numerical failure (non-finite loss, gradient check above tolerance).

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trinlu/checkpoint.hpp"
#include "trinlu/config.hpp"
#include "trinlu/convert.hpp"
#include "trinlu/corpus.hpp"
#include "trinlu/embedding.hpp"
#include "trinlu/error.hpp"
#include "trinlu/gradcheck.hpp"
#include "trinlu/synthetic.hpp"
#include "trinlu/trainer.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace trinlu;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr double kGradTolerance = 1e-4;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

// Written before any long-running work so an interrupted run still records
// how it was started.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::optional<TrainConfig> config;
  std::vector<fs::path> inputs;
  std::map<std::string, std::string> outputs;

  void write(const fs::path& path) const {
    ordered_json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config ? to_json(*config) : ordered_json(nullptr);
    j["seed"] = config ? ordered_json(config->seed) : ordered_json(nullptr);
    ordered_json in = ordered_json::array();
    for (const fs::path& p : inputs) {
      if (fs::is_regular_file(p))
        in.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
      else
        in.push_back({{"path", p.string()}, {"sha256", nullptr}});
    }
    j["inputs"] = std::move(in);
    j["outputs"] = outputs;
    j["timestamp"] = utc_timestamp();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
}

void log_line(const std::string& line) { std::cerr << line << std::endl; }

// Flag overrides for every TrainConfig field, applied on top of the config
// file in the order the fields are declared.
struct ConfigFlags {
  struct Entry {
    std::string flag;
    std::string section;
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };
  std::vector<Entry> entries;
  std::string config_path;

  void attach(CLI::App& app, const TrainConfig& defaults, bool config_required) {
    auto* opt = app.add_option("--config", config_path, "INI config file ([model] and [train] sections)");
    if (config_required) opt->required();
    opt->check(CLI::ExistingFile);

    const TrainConfig d = defaults.resolved();
    auto num = [](auto v) {
      std::ostringstream s;
      s << v;
      return s.str();
    };
    entries = {
        {"--d", "model", "d", "", nullptr},
        {"--length", "model", "length", "", nullptr},
        {"--heads", "model", "heads", "", nullptr},
        {"--d-ff", "model", "d_ff", "", nullptr},
        {"--layers", "model", "layers", "", nullptr},
        {"--variant", "model", "variant", "", nullptr},
        {"--exchange-layers", "model", "exchange_layers", "", nullptr},
        {"--activation", "model", "activation", "", nullptr},
        {"--dropout", "model", "dropout", "", nullptr},
        {"--epochs", "train", "epochs", "", nullptr},
        {"--lr", "train", "learning_rate", "", nullptr},
        {"--beta1", "train", "beta1", "", nullptr},
        {"--beta2", "train", "beta2", "", nullptr},
        {"--adam-eps", "train", "adam_eps", "", nullptr},
        {"--batch-size", "train", "batch_size", "", nullptr},
        {"--seed", "train", "seed", "", nullptr},
        {"--tasks", "train", "tasks", "", nullptr},
        {"--folds", "train", "folds", "", nullptr},
    };
    const std::map<std::string, std::string> shown{
        {"d", num(d.d)},
        {"length", num(d.length)},
        {"heads", num(d.heads)},
        {"d_ff", num(d.d_ff)},
        {"layers", num(d.layers)},
        {"variant", std::string(to_string(d.variant))},
        {"exchange_layers", std::string(to_string(d.exchange))},
        {"activation", to_string(d.activation)},
        {"dropout", num(d.dropout)},
        {"epochs", num(d.epochs)},
        {"learning_rate", num(d.learning_rate)},
        {"beta1", num(d.beta1)},
        {"beta2", num(d.beta2)},
        {"adam_eps", num(d.adam_eps)},
        {"batch_size", num(d.batch_size)},
        {"seed", num(d.seed)},
        {"tasks", d.tasks.label()},
        {"folds", num(d.folds)},
    };
    for (Entry& e : entries)
      e.option = app.add_option(e.flag, e.value, "overrides [" + e.section + "] " + e.key)
                     ->default_str(shown.at(e.key))
                     ->group("Config overrides");
  }

  TrainConfig resolve(TrainConfig base) const {
    if (!config_path.empty()) base = read_config(fs::path(config_path));
    for (const Entry& e : entries)
      if (e.option->count() > 0) set_config_value(base, e.section, e.key, e.value);
    base.validate();
    return base.resolved();
  }
};

std::optional<ExternalEmbeddings> load_embeddings(const std::string& path, std::size_t d) {
  if (path.empty()) return std::nullopt;
  return read_external_embeddings(fs::path(path), d);
}

std::vector<std::string> argv_list(int argc, char** argv) { return {argv, argv + argc}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint intent detection, slot filling and domain classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // convert
  auto* convert = app.add_subcommand("convert", "Convert a raw dialogue corpus to canonical JSONL");
  std::string convert_format, convert_input, convert_output, convert_split, convert_domain;
  bool convert_no_user = false, convert_no_system = false;
  convert->add_option("--format", convert_format, "m2m or multiwoz")
      ->required()
      ->check(CLI::IsMember({"m2m", "multiwoz"}));
  convert->add_option("--input", convert_input, "Dataset directory or file")->required();
  convert->add_option("--output", convert_output, "Canonical JSONL file to write")->required();
  convert->add_option("--split", convert_split, "Only files whose stem or a parent directory matches");
  convert->add_option("--domain", convert_domain, "M2M: domain label instead of the one inferred from the path");
  convert->add_flag("--no-user", convert_no_user, "Skip user turns");
  convert->add_flag("--no-system", convert_no_system, "Skip system turns");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train on a corpus (or cross-validate with --cv)");
  ConfigFlags train_flags;
  train_flags.attach(*train_cmd, TrainConfig{}, false);
  std::string train_corpus, train_eval_corpus, train_out, train_embeddings, train_eval_embeddings;
  bool train_cv = false;
  train_cmd->add_option("--corpus", train_corpus, "Canonical JSONL training corpus")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--eval-corpus", train_eval_corpus,
                        "Corpus evaluated after every epoch (default: the training corpus)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--embeddings", train_embeddings, "Frozen external embeddings for --corpus")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--eval-embeddings", train_eval_embeddings,
                        "Frozen external embeddings for --eval-corpus")
      ->check(CLI::ExistingFile);
  train_cmd->add_flag("--cv", train_cv, "k-fold cross-validation over dialogues; no checkpoint");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  std::string eval_checkpoint, eval_corpus, eval_out, eval_config, eval_embeddings;
  std::size_t eval_batch = 32;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", eval_corpus, "Canonical JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "Output directory (default: print only)");
  eval_cmd->add_option("--config", eval_config, "Fail unless this config matches the checkpoint")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--embeddings", eval_embeddings, "Frozen external embeddings for --corpus")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--batch-size", eval_batch, "Evaluation batch size")->capture_default_str();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Task-subset and encoder-variant grid, k-fold CV per cell");
  ConfigFlags ablate_flags;
  ablate_flags.attach(*ablate, TrainConfig{}, false);
  std::string ablate_corpus, ablate_out, ablate_embeddings;
  ablate->add_option("--corpus", ablate_corpus, "Canonical JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);
  ablate->add_option("--out", ablate_out, "Output directory")->required();
  ablate->add_option("--embeddings", ablate_embeddings, "Frozen external embeddings for --corpus")
      ->check(CLI::ExistingFile);

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  TrainConfig tiny;
  tiny.d = 8;
  tiny.length = 4;
  tiny.heads = 2;
  tiny.d_ff = 16;
  ConfigFlags grad_flags;
  grad_flags.attach(*gradcheck, tiny, false);
  std::size_t grad_vocab = 16, grad_slots = 3, grad_intents = 2, grad_domains = 2, grad_batch = 2;
  bool grad_all_variants = false;
  gradcheck->add_option("--vocab", grad_vocab, "Vocabulary size")->capture_default_str();
  gradcheck->add_option("--slots", grad_slots, "Slot label count")->capture_default_str();
  gradcheck->add_option("--intents", grad_intents, "Intent label count")->capture_default_str();
  gradcheck->add_option("--domains", grad_domains, "Domain label count")->capture_default_str();
  gradcheck->add_option("--batch", grad_batch, "Utterances in the checked batch")->capture_default_str();
  gradcheck->add_flag("--all-variants", grad_all_variants, "Check noex, cross and bf");

  // stats
  auto* stats = app.add_subcommand("stats", "Label inventories and length histogram of a corpus");
  std::string stats_corpus;
  stats->add_option("--corpus", stats_corpus, "Canonical JSONL corpus")
      ->required()
      ->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a learnable synthetic corpus");
  SyntheticSpec synth_spec;
  std::string synth_output;
  synth->add_option("--output", synth_output, "JSONL file to write")->required();
  synth->add_option("--utterances", synth_spec.utterances, "Utterance count")->capture_default_str();
  synth->add_option("--extra-fillers", synth_spec.extra_fillers, "Max extra filler tokens per utterance")
      ->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::vector<std::string> args = argv_list(argc, argv);
  try {
    if (*convert) {
      ConvertOptions options;
      options.user_turns = !convert_no_user;
      options.system_turns = !convert_no_system;
      if (!convert_split.empty()) options.split = convert_split;
      if (!convert_domain.empty()) options.domain = convert_domain;
      const fs::path output(convert_output);
      const fs::path report_path = output.string() + ".report.txt";
      RunManifest manifest{"convert", args, std::nullopt, {fs::path(convert_input)},
                           {{"corpus", output.string()}, {"report", report_path.string()}}};
      manifest.write(output.string() + ".manifest.json");
      const ConversionResult result = convert_format == "m2m"
                                          ? convert_m2m(fs::path(convert_input), options)
                                          : convert_multiwoz(fs::path(convert_input), options);
      if (output.has_parent_path()) fs::create_directories(output.parent_path());
      write_corpus(output, result.utterances);
      write_text(report_path, result.report.text());
      std::cout << result.report.text();
      return 0;
    }

    if (*train_cmd) {
      const TrainConfig config = train_flags.resolve(TrainConfig{});
      const fs::path out(train_out);
      fs::create_directories(out);
      RunManifest manifest{train_cv ? "train --cv" : "train", args, config, {fs::path(train_corpus)}, {}};
      if (!train_flags.config_path.empty()) manifest.inputs.push_back(train_flags.config_path);
      if (!train_eval_corpus.empty()) manifest.inputs.push_back(train_eval_corpus);
      if (!train_embeddings.empty()) manifest.inputs.push_back(train_embeddings);
      if (!train_eval_embeddings.empty()) manifest.inputs.push_back(train_eval_embeddings);
      manifest.outputs = {{"metrics", (out / "metrics.json").string()},
                          {"table", (out / "metrics.txt").string()}};
      if (!train_cv) manifest.outputs["checkpoint"] = (out / "checkpoint.bin").string();
      manifest.write(out / "manifest.json");

      const std::vector<Utterance> corpus = read_corpus(fs::path(train_corpus));
      const auto embeddings = load_embeddings(train_embeddings, config.d);
      const ExternalEmbeddings* external = embeddings ? &*embeddings : nullptr;
      const TrainHooks hooks{log_line};
      MetricsReport report;
      if (train_cv) {
        report = cross_validate(config, corpus, external, hooks);
      } else {
        std::vector<Utterance> eval_corpus;
        std::optional<ExternalEmbeddings> eval_emb;
        DataView eval_view = DataView::all(corpus, external);
        std::string split = "train";
        if (!train_eval_corpus.empty()) {
          eval_corpus = read_corpus(fs::path(train_eval_corpus));
          eval_emb = load_embeddings(train_eval_embeddings, config.d);
          eval_view = DataView::all(eval_corpus, eval_emb ? &*eval_emb : nullptr);
          split = fs::path(train_eval_corpus).filename().string();
        } else if (!train_eval_embeddings.empty()) {
          throw ConfigError("--eval-embeddings needs --eval-corpus");
        }
        TrainOutcome outcome = train(config, DataView::all(corpus, external), eval_view, hooks);
        outcome.report.eval_split = split;
        save_checkpoint(out / "checkpoint.bin", config, outcome.vocabs, outcome.model);
        report = MetricsReport{"train", config, {std::move(outcome.report)}};
      }
      write_text(out / "metrics.json", report.json().dump(2) + "\n");
      write_text(out / "metrics.txt", report.table());
      std::cout << report.table();
      return 0;
    }

    if (*eval_cmd) {
      RunManifest manifest{"eval", args, std::nullopt,
                           {fs::path(eval_checkpoint), fs::path(eval_corpus)}, {}};
      if (!eval_out.empty()) {
        const fs::path out(eval_out);
        manifest.outputs = {{"metrics", (out / "metrics.json").string()},
                            {"table", (out / "metrics.txt").string()}};
      }
      Checkpoint checkpoint = load_checkpoint(fs::path(eval_checkpoint));
      manifest.config = checkpoint.config;
      if (!eval_config.empty()) {
        manifest.inputs.push_back(eval_config);
        require_same_architecture(checkpoint.config, read_config(fs::path(eval_config)));
      }
      if (!eval_out.empty()) manifest.write(fs::path(eval_out) / "manifest.json");

      const std::vector<Utterance> corpus = read_corpus(fs::path(eval_corpus));
      const auto embeddings = load_embeddings(eval_embeddings, checkpoint.config.d);
      FoldReport fold;
      fold.eval_split = fs::path(eval_corpus).filename().string();
      fold.final_metrics = evaluate(checkpoint.model, checkpoint.vocabs, checkpoint.config.tasks,
                                    DataView::all(corpus, embeddings ? &*embeddings : nullptr),
                                    eval_batch);
      const MetricsReport report{"eval", checkpoint.config, {std::move(fold)}};
      if (!eval_out.empty()) {
        write_text(fs::path(eval_out) / "metrics.json", report.json().dump(2) + "\n");
        write_text(fs::path(eval_out) / "metrics.txt", report.table());
      }
      std::cout << report.table();
      return 0;
    }

    if (*ablate) {
      const TrainConfig config = ablate_flags.resolve(TrainConfig{});
      const fs::path out(ablate_out);
      fs::create_directories(out);
      RunManifest manifest{"ablate", args, config, {fs::path(ablate_corpus)},
                           {{"grid", (out / "metrics.json").string()},
                            {"report", (out / "report.txt").string()}}};
      if (!ablate_flags.config_path.empty()) manifest.inputs.push_back(ablate_flags.config_path);
      if (!ablate_embeddings.empty()) manifest.inputs.push_back(ablate_embeddings);
      manifest.write(out / "manifest.json");

      const std::vector<Utterance> corpus = read_corpus(fs::path(ablate_corpus));
      const auto embeddings = load_embeddings(ablate_embeddings, config.d);
      const AblationGrid grid =
          run_ablation(config, corpus, embeddings ? &*embeddings : nullptr, TrainHooks{log_line});
      write_text(out / "metrics.json", grid.json().dump(2) + "\n");
      write_text(out / "report.txt", grid.table());
      std::cout << grid.table();
      return 0;
    }

    if (*gradcheck) {
      TrainConfig config = grad_flags.resolve(tiny);
      std::vector<EncoderVariant> variants{config.variant};
      if (grad_all_variants)
        variants = {EncoderVariant::no_exchange, EncoderVariant::cross_attention,
                    EncoderVariant::before_feed_forward};
      double worst = 0.0;
      for (EncoderVariant v : variants) {
        config.variant = v;
        ModelConfig mc;
        mc.vocab = grad_vocab;
        mc.length = config.length;
        mc.d = config.d;
        mc.heads = config.heads;
        mc.d_ff = config.d_ff;
        mc.layers = config.layers;
        mc.variant = v;
        mc.exchange = config.exchange;
        mc.activation = config.activation;
        mc.slots = grad_slots;
        mc.intents = grad_intents;
        mc.domains = grad_domains;
        const SmoothPointCheck check =
            check_model_at_smooth_point(mc, config.seed, grad_batch, config.tasks);
        const GradCheckResult& r = check.result;
        std::cout << to_string(v) << ": max relative error " << std::scientific
                  << std::setprecision(3) << r.max_relative_error << " over "
                  << r.components_checked << " components (worst " << r.worst_parameter << "["
                  << r.worst_index << "] analytic " << r.analytic << " numeric " << r.numeric
                  << "); over components >= " << r.resolved_floor << ": "
                  << r.max_resolved_error << "; seed " << check.seed << ", relu margin "
                  << check.relu_margin << "\n";
        worst = std::max(worst, r.max_relative_error);
      }
      if (worst >= kGradTolerance) {
        std::cerr << "gradient check failed: " << worst << " >= " << kGradTolerance << "\n";
        return kExitNumerical;
      }
      return 0;
    }

    if (*stats) {
      std::cout << format_stats(compute_stats(read_corpus(fs::path(stats_corpus))));
      return 0;
    }

    if (*synth) {
      const fs::path output(synth_output);
      if (output.has_parent_path()) fs::create_directories(output.parent_path());
      write_corpus(output, make_synthetic_corpus(synth_spec));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
