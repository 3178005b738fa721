#include "trinlu/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "trinlu/error.hpp"
#include "trinlu/optim.hpp"

namespace trinlu {

using ordered_json = nlohmann::ordered_json;

DataView DataView::all(std::span<const Utterance> corpus, const ExternalEmbeddings* external) {
  DataView v{corpus, std::vector<std::size_t>(corpus.size()), external};
  std::iota(v.indices.begin(), v.indices.end(), 0);
  return v;
}

std::vector<Utterance> DataView::rows() const {
  std::vector<Utterance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(corpus[i]);
  return out;
}

ModelConfig model_config(const TrainConfig& config, const LabelVocabs& vocabs) {
  const TrainConfig c = config.resolved();
  ModelConfig m;
  m.vocab = vocabs.tokens.size();
  m.length = c.length;
  m.d = c.d;
  m.heads = c.heads;
  m.d_ff = c.d_ff;
  m.layers = c.layers;
  m.variant = c.variant;
  m.exchange = c.exchange;
  m.activation = c.activation;
  m.slots = vocabs.slots.size();
  m.intents = vocabs.intents.size();
  m.domains = vocabs.domains.size();
  return m;
}

namespace {

// Indexed by corpus row; only rows listed in the views are filled in.
std::vector<EncodedUtterance> encode_rows(const std::vector<const DataView*>& views,
                                          const LabelVocabs& vocabs, std::size_t length) {
  std::vector<EncodedUtterance> encoded(views.front()->corpus.size());
  for (const DataView* v : views)
    for (std::size_t i : v->indices) encoded[i] = pad_truncate(v->corpus[i], length, vocabs);
  return encoded;
}

void check_external(const DataView& data, std::size_t d, std::size_t length) {
  if (!data.external) return;
  if (data.external->d != d)
    throw DataError("external embeddings have d = " + std::to_string(data.external->d) +
                    ", the model expects d = " + std::to_string(d));
  if (data.external->utterances(length) < data.corpus.size())
    throw DataError("external embeddings cover " +
                    std::to_string(data.external->utterances(length)) + " utterances, corpus has " +
                    std::to_string(data.corpus.size()));
}

std::size_t argmax_row(const double* row, std::size_t n) {
  return static_cast<std::size_t>(std::max_element(row, row + n) - row);
}

TaskMetrics evaluate_encoded(const TriNluModel& model, const LabelVocabs& vocabs,
                             const TaskSet& tasks, const DataView& data,
                             std::span<const EncodedUtterance> encoded, std::size_t batch_size) {
  TaskMetrics m;
  m.utterances = data.indices.size();
  if (data.indices.empty()) return m;
  const std::size_t n = model.config().length;
  const int outside = vocabs.outside_id();

  std::vector<int> intent_pred, intent_gold, domain_pred, domain_gold;
  std::vector<std::vector<int>> slot_pred, slot_gold;
  std::vector<std::vector<std::uint8_t>> pads;
  double loss_sum = 0.0;

  for (std::size_t start = 0; start < data.indices.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, data.indices.size());
    const std::span<const std::size_t> rows(data.indices.data() + start, end - start);
    const Batch batch = make_batch(encoded, rows, n, data.external);
    Graph g;
    const JointOutput out = model.forward(g, batch);
    loss_sum += joint_loss(out, batch.targets, tasks).value()[0] * static_cast<double>(rows.size());

    const Tensor& ps = out.slots.value();
    const Tensor& pi = out.intent.value();
    const Tensor& pd = out.domain.value();
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const EncodedUtterance& e = encoded[rows[b]];
      m.unseen_labels += e.unseen_labels;
      intent_pred.push_back(static_cast<int>(argmax_row(pi.raw() + b * pi.cols(), pi.cols())));
      intent_gold.push_back(e.intent);
      domain_pred.push_back(static_cast<int>(argmax_row(pd.raw() + b * pd.cols(), pd.cols())));
      domain_gold.push_back(e.domain);
      std::vector<int> seq(n);
      for (std::size_t t = 0; t < n; ++t)
        seq[t] = static_cast<int>(argmax_row(ps.raw() + (b * n + t) * ps.cols(), ps.cols()));
      slot_pred.push_back(std::move(seq));
      slot_gold.push_back(e.slots);
      pads.push_back(e.pad);
    }
  }
  m.loss = loss_sum / static_cast<double>(data.indices.size());
  if (tasks.intent) m.intent_accuracy = intent_accuracy(intent_pred, intent_gold);
  if (tasks.domain) m.domain_accuracy = intent_accuracy(domain_pred, domain_gold);
  if (tasks.slot) m.slot = slot_token_f1(slot_pred, slot_gold, pads, outside);
  return m;
}

}  // namespace

TaskMetrics evaluate(const TriNluModel& model, const LabelVocabs& vocabs, const TaskSet& tasks,
                     const DataView& data, std::size_t batch_size) {
  check_external(data, model.config().d, model.config().length);
  const auto encoded = encode_rows({&data}, vocabs, model.config().length);
  return evaluate_encoded(model, vocabs, tasks, data, encoded, batch_size);
}

double majority_intent_accuracy(const DataView& train_data, const DataView& eval_data) {
  if (train_data.indices.empty() || eval_data.indices.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  for (std::size_t i : train_data.indices) ++counts[train_data.corpus[i].intent];
  // Ties go to the lexicographically first label.
  const auto best = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second < b.second;
  });
  std::size_t hits = 0;
  for (std::size_t i : eval_data.indices) hits += eval_data.corpus[i].intent == best->first;
  return static_cast<double>(hits) / static_cast<double>(eval_data.indices.size());
}

TrainOutcome train(const TrainConfig& config_in, const DataView& train_data,
                   const DataView& eval_data, const TrainHooks& hooks) {
  const TrainConfig config = config_in.resolved();
  config.validate();
  if (train_data.indices.empty()) throw DataError("training split is empty");

  LabelVocabs vocabs = LabelVocabs::build(train_data.rows());
  TriNluModel model(model_config(config, vocabs), config.seed);
  check_external(train_data, config.d, config.length);
  check_external(eval_data, config.d, config.length);

  std::vector<EncodedUtterance> encoded = encode_rows({&train_data}, vocabs, config.length);
  std::vector<EncodedUtterance> eval_encoded =
      encode_rows({&eval_data}, vocabs, config.length);

  Adam adam(model.parameters(), {config.learning_rate, config.beta1, config.beta2, config.adam_eps});
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 dropout_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  ForwardOptions options;
  options.dropout = config.dropout;
  options.rng = &dropout_rng;

  FoldReport report;
  report.train_size = train_data.indices.size();
  std::vector<std::size_t> order = train_data.indices;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(shuffle_rng)]);
    }
    double loss_sum = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_id) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Batch batch = make_batch(encoded, rows, config.length, train_data.external);
      const std::string where =
          "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_id + 1);
      Graph g;
      Var loss;
      try {
        loss = joint_loss(model.forward(g, batch, options), batch.targets, config.tasks);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite loss at " + where + " (" + e.what() + ")");
      }
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw NumericalError("non-finite loss at " + where);
      model.parameters().zero_grad();
      g.backward(loss);
      adam.step(model.parameters());
      loss_sum += value * static_cast<double>(rows.size());
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.eval = evaluate_encoded(model, vocabs, config.tasks, eval_data, eval_encoded,
                                   config.batch_size);
    if (hooks.log) {
      std::ostringstream line;
      line << "epoch " << epoch << " loss " << record.train_loss;
      if (record.eval.intent_accuracy) line << " intent " << *record.eval.intent_accuracy;
      if (record.eval.slot) line << " slot_f1 " << record.eval.slot->f1;
      if (record.eval.domain_accuracy) line << " domain " << *record.eval.domain_accuracy;
      hooks.log(line.str());
    }
    report.epochs.push_back(std::move(record));
  }
  report.final_metrics = report.epochs.back().eval;
  report.majority_intent_accuracy = majority_intent_accuracy(train_data, eval_data);
  return {std::move(model), std::move(vocabs), std::move(report)};
}

// --- Aggregation -----------------------------------------------------------

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return r;
}

MetricSummary summarize(std::span<const FoldReport> folds) {
  MetricSummary s;
  if (folds.empty()) return s;
  auto collect = [&folds](auto get) -> std::optional<MeanStd> {
    std::vector<double> values;
    for (const FoldReport& f : folds) {
      const std::optional<double> v = get(f);
      if (!v) return std::nullopt;
      values.push_back(*v);
    }
    return mean_std(values);
  };
  s.intent_accuracy = collect([](const FoldReport& f) { return f.final_metrics.intent_accuracy; });
  s.domain_accuracy = collect([](const FoldReport& f) { return f.final_metrics.domain_accuracy; });
  auto slot = [](double SlotScores::*field) {
    return [field](const FoldReport& f) -> std::optional<double> {
      if (!f.final_metrics.slot) return std::nullopt;
      return (*f.final_metrics.slot).*field;
    };
  };
  s.slot_precision = collect(slot(&SlotScores::precision));
  s.slot_recall = collect(slot(&SlotScores::recall));
  s.slot_f1 = collect(slot(&SlotScores::f1));
  s.majority_intent_accuracy = collect([](const FoldReport& f) { return f.majority_intent_accuracy; });
  return s;
}

namespace {

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json metrics_json(const TaskMetrics& m) {
  ordered_json j;
  j["utterances"] = m.utterances;
  j["unseen_labels"] = m.unseen_labels;
  j["loss"] = m.loss;
  j["intent_accuracy"] = optional_json(m.intent_accuracy);
  j["domain_accuracy"] = optional_json(m.domain_accuracy);
  if (m.slot) {
    j["slot_precision"] = m.slot->precision;
    j["slot_recall"] = m.slot->recall;
    j["slot_f1"] = m.slot->f1;
  } else {
    j["slot_precision"] = nullptr;
    j["slot_recall"] = nullptr;
    j["slot_f1"] = nullptr;
  }
  return j;
}

ordered_json fold_json(const FoldReport& f) {
  ordered_json j;
  j["fold"] = f.fold ? ordered_json(*f.fold) : ordered_json(nullptr);
  j["eval_split"] = f.eval_split;
  j["train_size"] = f.train_size;
  ordered_json epochs = ordered_json::array();
  for (const EpochRecord& e : f.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"eval", metrics_json(e.eval)}});
  j["epochs"] = std::move(epochs);
  j["final"] = metrics_json(f.final_metrics);
  j["majority_intent_accuracy"] = optional_json(f.majority_intent_accuracy);
  return j;
}

ordered_json summary_json(const MetricSummary& s) {
  auto cell = [](const std::optional<MeanStd>& v) {
    return v ? ordered_json{{"mean", v->mean}, {"std", v->std}} : ordered_json(nullptr);
  };
  return {{"intent_accuracy", cell(s.intent_accuracy)},
          {"domain_accuracy", cell(s.domain_accuracy)},
          {"slot_precision", cell(s.slot_precision)},
          {"slot_recall", cell(s.slot_recall)},
          {"slot_f1", cell(s.slot_f1)},
          {"majority_intent_accuracy", cell(s.majority_intent_accuracy)}};
}

std::string percent(const std::optional<MeanStd>& v, bool with_std) {
  if (!v) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * v->mean;
  if (with_std) out << " ± " << 100.0 * v->std;
  return out.str();
}

// Column widths count code points so the "±" does not skew alignment.
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const std::string& cell = rows[r][c];
      const std::string padding(width[c] - display_width(cell), ' ');
      if (c == 0) out << cell << padding;
      else out << "  " << padding << cell;
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out << std::string(total - 2, '-') << "\n";
    }
  }
  return out.str();
}

}  // namespace

ordered_json MetricsReport::json() const {
  ordered_json j;
  j["mode"] = mode;
  j["config"] = to_json(config);
  ordered_json fold_list = ordered_json::array();
  for (const FoldReport& f : folds) fold_list.push_back(fold_json(f));
  j["folds"] = std::move(fold_list);
  j["summary"] = summary_json(summarize(folds));
  return j;
}

std::string MetricsReport::table() const {
  std::vector<std::vector<std::string>> rows{
      {"Fold", "ID Acc", "SF P", "SF R", "SF F1", "DC Acc", "Majority ID"}};
  auto single = [](const std::optional<double>& v) -> std::optional<MeanStd> {
    if (!v) return std::nullopt;
    return MeanStd{*v, 0.0};
  };
  for (const FoldReport& f : folds) {
    const TaskMetrics& m = f.final_metrics;
    std::optional<double> p, r, f1;
    if (m.slot) p = m.slot->precision, r = m.slot->recall, f1 = m.slot->f1;
    rows.push_back({f.fold ? std::to_string(*f.fold) : f.eval_split,
                    percent(single(m.intent_accuracy), false), percent(single(p), false),
                    percent(single(r), false), percent(single(f1), false),
                    percent(single(m.domain_accuracy), false),
                    percent(single(f.majority_intent_accuracy), false)});
  }
  if (folds.size() > 1) {
    const MetricSummary s = summarize(folds);
    rows.push_back({"mean ± std", percent(s.intent_accuracy, true), percent(s.slot_precision, true),
                    percent(s.slot_recall, true), percent(s.slot_f1, true),
                    percent(s.domain_accuracy, true), percent(s.majority_intent_accuracy, true)});
  }
  std::ostringstream out;
  out << "mode: " << mode << "  variant: " << to_string(config.variant)
      << "  tasks: " << config.tasks.label() << "\n\n"
      << render(rows);
  return out.str();
}

MetricsReport cross_validate(const TrainConfig& config, std::span<const Utterance> corpus,
                             const ExternalEmbeddings* external, const TrainHooks& hooks) {
  config.validate();
  MetricsReport report{"cv", config.resolved(), {}};
  const std::vector<Fold> folds = kfold_split(corpus, config.folds, config.seed);
  for (std::size_t k = 0; k < folds.size(); ++k) {
    if (hooks.log) hooks.log("fold " + std::to_string(k + 1) + "/" + std::to_string(folds.size()));
    const DataView train_view{corpus, folds[k].train, external};
    const DataView eval_view{corpus, folds[k].validation, external};
    TrainOutcome outcome = train(config, train_view, eval_view, hooks);
    outcome.report.fold = k;
    outcome.report.eval_split = "held-out";
    report.folds.push_back(std::move(outcome.report));
  }
  return report;
}

std::string variant_title(EncoderVariant variant) {
  switch (variant) {
    case EncoderVariant::no_exchange: return "NoEx";
    case EncoderVariant::cross_attention: return "Cross-Attention";
    case EncoderVariant::before_feed_forward: return "Before-Feed-Forward";
  }
  return "?";
}

AblationGrid run_ablation(const TrainConfig& base, std::span<const Utterance> corpus,
                          const ExternalEmbeddings* external, const TrainHooks& hooks) {
  base.validate();
  AblationGrid grid;
  auto run = [&](std::string group, std::string label, const TrainConfig& config) {
    if (hooks.log) hooks.log("ablation cell " + group + " " + label);
    AblationRow row{std::move(group), std::move(label), config.resolved(), {}, {}};
    // The full-task row at the base variant is shared by both groups.
    for (const AblationRow& done : grid.rows)
      if (done.config == row.config) {
        row.folds = done.folds;
        row.summary = done.summary;
        grid.rows.push_back(std::move(row));
        return;
      }
    row.folds = cross_validate(config, corpus, external, hooks).folds;
    row.summary = summarize(row.folds);
    grid.rows.push_back(std::move(row));
  };
  for (const TaskSet& tasks : TaskSet::ablation_subsets()) {
    TrainConfig c = base;
    c.tasks = tasks;
    run("tasks", tasks.label(), c);
  }
  for (EncoderVariant v : {EncoderVariant::no_exchange, EncoderVariant::cross_attention,
                           EncoderVariant::before_feed_forward}) {
    TrainConfig c = base;
    c.tasks = TaskSet{};
    c.variant = v;
    run("encoder", variant_title(v), c);
  }
  return grid;
}

ordered_json AblationGrid::json() const {
  ordered_json rows_json = ordered_json::array();
  for (const AblationRow& r : rows) {
    ordered_json folds_json = ordered_json::array();
    for (const FoldReport& f : r.folds) folds_json.push_back(fold_json(f));
    rows_json.push_back({{"group", r.group},
                         {"label", r.label},
                         {"config", to_json(r.config)},
                         {"summary", summary_json(r.summary)},
                         {"folds", std::move(folds_json)}});
  }
  return {{"rows", std::move(rows_json)}};
}

std::string AblationGrid::table() const {
  std::ostringstream out;
  for (const char* group : {"tasks", "encoder"}) {
    std::vector<std::vector<std::string>> table{
        {std::string(group) == "tasks" ? "Tasks" : "Encoder", "ID Acc", "SF F1", "DC Acc",
         "Majority ID"}};
    for (const AblationRow& r : rows) {
      if (r.group != group) continue;
      table.push_back({r.label, percent(r.summary.intent_accuracy, true),
                       percent(r.summary.slot_f1, true), percent(r.summary.domain_accuracy, true),
                       percent(r.summary.majority_intent_accuracy, true)});
    }
    if (out.tellp() > 0) out << "\n";
    out << render(table);
  }
  return out.str();
}

}  // namespace trinlu
