#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trinlu/config.hpp"
#include "trinlu/corpus.hpp"
#include "trinlu/embedding.hpp"
#include "trinlu/metrics.hpp"
#include "trinlu/model.hpp"

namespace trinlu {

/// Rows of a corpus forming one split. External embeddings, when present,
/// are indexed by corpus row.
struct DataView {
  std::span<const Utterance> corpus;
  std::vector<std::size_t> indices;
  const ExternalEmbeddings* external = nullptr;

  static DataView all(std::span<const Utterance> corpus, const ExternalEmbeddings* external = nullptr);
  std::vector<Utterance> rows() const;
};

/// Metrics of inactive tasks are absent rather than zero.
struct TaskMetrics {
  std::size_t utterances = 0;
  std::size_t unseen_labels = 0;
  double loss = 0.0;
  std::optional<double> intent_accuracy;
  std::optional<double> domain_accuracy;
  std::optional<SlotScores> slot;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  TaskMetrics eval;
};

struct FoldReport {
  std::optional<std::size_t> fold;
  std::string eval_split;  // "held-out", "train" or the corpus evaluated
  std::size_t train_size = 0;
  std::vector<EpochRecord> epochs;
  TaskMetrics final_metrics;
  std::optional<double> majority_intent_accuracy;
};

struct TrainHooks {
  std::function<void(const std::string&)> log;
};

struct TrainOutcome {
  TriNluModel model;
  LabelVocabs vocabs;
  FoldReport report;
};

ModelConfig model_config(const TrainConfig& config, const LabelVocabs& vocabs);

/// Deterministic given (config, data): parameters are initialised from
/// config.seed and batches are reshuffled every epoch from a seed-derived
/// stream. Evaluates on `eval` after every epoch with parameters frozen.
/// Throws NumericalError naming the epoch and batch on a non-finite loss.
TrainOutcome train(const TrainConfig& config, const DataView& train_data, const DataView& eval_data,
                   const TrainHooks& hooks = {});

TaskMetrics evaluate(const TriNluModel& model, const LabelVocabs& vocabs, const TaskSet& tasks,
                     const DataView& data, std::size_t batch_size);

/// Accuracy of always predicting the most frequent training intent.
double majority_intent_accuracy(const DataView& train_data, const DataView& eval_data);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

struct MetricSummary {
  std::optional<MeanStd> intent_accuracy;
  std::optional<MeanStd> domain_accuracy;
  std::optional<MeanStd> slot_precision;
  std::optional<MeanStd> slot_recall;
  std::optional<MeanStd> slot_f1;
  std::optional<MeanStd> majority_intent_accuracy;
};
MetricSummary summarize(std::span<const FoldReport> folds);

struct MetricsReport {
  std::string mode;  // train | cv | eval
  TrainConfig config;
  std::vector<FoldReport> folds;

  nlohmann::ordered_json json() const;
  std::string table() const;
};

/// k-fold cross-validation over dialogues (config.folds folds).
MetricsReport cross_validate(const TrainConfig& config, std::span<const Utterance> corpus,
                             const ExternalEmbeddings* external = nullptr,
                             const TrainHooks& hooks = {});

struct AblationRow {
  std::string group;  // "tasks" or "encoder"
  std::string label;  // e.g. "SF+ID" or "Cross-Attention"
  TrainConfig config;
  std::vector<FoldReport> folds;
  MetricSummary summary;
};

struct AblationGrid {
  std::vector<AblationRow> rows;

  nlohmann::ordered_json json() const;
  std::string table() const;
};

/// Six task subsets at the base variant, then the three encoder variants
/// with all tasks active; each cell is a full cross-validation.
AblationGrid run_ablation(const TrainConfig& base, std::span<const Utterance> corpus,
                          const ExternalEmbeddings* external = nullptr,
                          const TrainHooks& hooks = {});

std::string variant_title(EncoderVariant variant);

}  // namespace trinlu
