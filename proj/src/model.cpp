#include "trinlu/model.hpp"

#include <cmath>
#include <random>

#include "trinlu/error.hpp"

namespace trinlu {

void ModelConfig::validate() const {
  if (vocab < 2) throw ConfigError("vocabulary must hold at least <pad> and <unk>");
  if (length == 0 || d < 2 || d_ff == 0 || layers == 0)
    throw ConfigError("sequence length, d, d_ff and layers must be positive (d >= 2)");
  if (heads == 0 || d % heads != 0)
    throw ConfigError("d = " + std::to_string(d) + " is not divisible by heads = " +
                      std::to_string(heads));
  if (slots == 0 || intents == 0 || domains == 0)
    throw ConfigError("slot, intent and domain inventories must be non-empty");
}

TriEncoderConfig ModelConfig::encoder() const {
  return {d, d_ff, heads, layers, variant, exchange, activation};
}

JointHeadDims ModelConfig::head() const { return {length, d, slots, intents, domains}; }

ParameterCounts count_parameters(const ModelConfig& c) {
  ParameterCounts counts;
  counts.embedding = 3 * (c.vocab * c.d + c.length * c.d);
  const std::size_t layer = 4 * (c.d * c.d + c.d)          // Q, K, V, output
                            + (c.d * c.d_ff + c.d_ff)       // FF inner
                            + (c.d_ff * c.d + c.d)          // FF outer
                            + 2 * 2 * c.d;                  // two layer norms
  counts.encoder = 3 * c.layers * layer;
  const std::size_t merge = 2 * c.d * c.d + c.d;
  const TriEncoderConfig enc = c.encoder();
  for (std::size_t l = 0; l < c.layers; ++l) {
    if (!enc.exchanges_at(l)) continue;
    counts.merge += c.variant == EncoderVariant::cross_attention ? 2 * merge : merge;
  }
  counts.head = JointHeadParams::parameter_count(c.head());
  counts.total = counts.embedding + counts.encoder + counts.merge + counts.head;
  return counts;
}

Batch make_batch(std::span<const EncodedUtterance> encoded, std::span<const std::size_t> indices,
                 std::size_t length, const ExternalEmbeddings* external) {
  if (indices.empty()) throw DataError("empty batch");
  Batch b;
  b.size = indices.size();
  b.length = length;
  b.tokens.reserve(b.size * length);
  for (std::size_t i : indices) {
    const EncodedUtterance& e = encoded[i];
    if (e.tokens.size() != length) throw ShapeError("encoded utterance has the wrong length");
    b.tokens.insert(b.tokens.end(), e.tokens.begin(), e.tokens.end());
    b.targets.slots.insert(b.targets.slots.end(), e.slots.begin(), e.slots.end());
    b.targets.pad.insert(b.targets.pad.end(), e.pad.begin(), e.pad.end());
    b.targets.intents.push_back(e.intent);
    b.targets.domains.push_back(e.domain);
  }
  if (external) {
    Tensor rows({b.size, length, external->d});
    const std::size_t stride = length * external->d;
    for (std::size_t k = 0; k < b.size; ++k) {
      const Tensor u = external->utterance(indices[k], length);
      std::copy(u.data().begin(), u.data().end(), rows.raw() + k * stride);
    }
    b.external = std::move(rows);
  }
  return b;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void initialise(ParameterStore& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < store.count(); ++i) {
    Parameter& p = store[i];
    double bound = 0.0;
    if (ends_with(p.name, ".tokens") || ends_with(p.name, ".positions")) {
      bound = 0.1;
    } else if (ends_with(p.name, ".weight")) {
      bound = 1.0 / std::sqrt(static_cast<double>(p.value.dim(0)));
    } else if (ends_with(p.name, ".bias")) {
      const std::string weight = p.name.substr(0, p.name.size() - 5) + ".weight";
      bound = 1.0 / std::sqrt(static_cast<double>(store.get(weight).value.dim(0)));
    } else if (ends_with(p.name, ".gain")) {
      p.value.fill(1.0);
      continue;
    } else {
      p.value.fill(0.0);
      continue;
    }
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : p.value.data()) v = dist(rng);
  }
}

}  // namespace

TriNluModel::TriNluModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  embedding_ = EmbeddingParams::create(store_, config_.vocab, config_.length, config_.d);
  encoder_ = TriEncoderParams::create(store_, config_.encoder());
  head_ = JointHeadParams::create(store_, config_.head());
  initialise(store_, seed);
}

TriHidden TriNluModel::embed(Graph& g, const Batch& batch) const {
  if (batch.length != config_.length)
    throw ShapeError("batch length " + std::to_string(batch.length) + " differs from model length " +
                     std::to_string(config_.length));
  if (batch.external) {
    if (batch.external->shape() != Shape{batch.size, batch.length, config_.d})
      throw ShapeError("external embeddings " + shape_string(batch.external->shape()) +
                       " do not match the batch");
    Var frozen = g.constant(*batch.external);
    return {frozen, frozen, frozen};
  }
  return {trinlu::embed(g, batch.tokens, batch.size, Stream::intent, embedding_),
          trinlu::embed(g, batch.tokens, batch.size, Stream::slot, embedding_),
          trinlu::embed(g, batch.tokens, batch.size, Stream::domain, embedding_)};
}

JointOutput TriNluModel::forward(Graph& g, const Batch& batch, const ForwardOptions& options,
                                 TriHidden* hidden_out) const {
  const TriHidden hidden =
      tri_forward(g, config_.variant, embed(g, batch), batch.mask(), encoder_, options);
  if (hidden_out) *hidden_out = hidden;
  return joint_head(g, hidden, head_);
}

Batch random_batch(const ModelConfig& config, std::size_t size, std::mt19937_64& rng) {
  auto draw = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  Batch b;
  b.size = size;
  b.length = config.length;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t t = 0; t < config.length; ++t) {
      const bool pad = config.length > 1 && i % 2 == 1 && t + 1 == config.length;
      b.tokens.push_back(pad ? kPadId : draw(kUnknownId, config.vocab - 1));
      b.targets.slots.push_back(static_cast<int>(draw(0, config.slots - 1)));
      b.targets.pad.push_back(pad ? 1 : 0);
    }
    b.targets.intents.push_back(static_cast<int>(draw(0, config.intents - 1)));
    b.targets.domains.push_back(static_cast<int>(draw(0, config.domains - 1)));
  }
  return b;
}

}  // namespace trinlu
