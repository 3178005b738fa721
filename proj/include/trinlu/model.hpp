#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "trinlu/autodiff.hpp"
#include "trinlu/corpus.hpp"
#include "trinlu/embedding.hpp"
#include "trinlu/encoder.hpp"
#include "trinlu/joint_head.hpp"
#include "trinlu/tri_encoder.hpp"

namespace trinlu {

struct ModelConfig {
  std::size_t vocab = 0;
  std::size_t length = 20;
  std::size_t d = 768;
  std::size_t heads = 3;
  std::size_t d_ff = 3072;
  std::size_t layers = 2;
  EncoderVariant variant = EncoderVariant::cross_attention;
  ExchangeLayers exchange = ExchangeLayers::first;
  Activation activation = Activation::relu;
  std::size_t slots = 0;
  std::size_t intents = 0;
  std::size_t domains = 0;

  void validate() const;
  TriEncoderConfig encoder() const;
  JointHeadDims head() const;
};

struct ParameterCounts {
  std::size_t embedding = 0;
  std::size_t encoder = 0;  // the three stacks
  std::size_t merge = 0;    // exchange projections
  std::size_t head = 0;
  std::size_t total = 0;
};

/// Closed-form count from the configured dimensions.
ParameterCounts count_parameters(const ModelConfig& config);

struct Batch {
  std::size_t size = 0;
  std::size_t length = 0;
  std::vector<std::size_t> tokens;   // size * length
  JointTargets targets;
  std::optional<Tensor> external;    // [size, length, d], used for all three streams

  AttentionMask mask() const { return AttentionMask(size, length, targets.pad); }
};

/// Gathers the listed utterances; external rows, when given, are looked up
/// by the same indices.
Batch make_batch(std::span<const EncodedUtterance> encoded, std::span<const std::size_t> indices,
                 std::size_t length, const ExternalEmbeddings* external = nullptr);

class TriNluModel {
 public:
  /// Allocates and initialises every parameter from seed: embeddings
  /// U(-0.1, 0.1), linear weights and biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
  /// layer-norm gain 1 and shift 0.
  TriNluModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& parameters() noexcept { return store_; }
  const ParameterStore& parameters() const noexcept { return store_; }
  const EmbeddingParams& embedding() const noexcept { return embedding_; }
  const TriEncoderParams& encoder() const noexcept { return encoder_; }
  const JointHeadParams& head() const noexcept { return head_; }

  TriHidden embed(Graph& g, const Batch& batch) const;
  JointOutput forward(Graph& g, const Batch& batch, const ForwardOptions& options = {},
                      TriHidden* hidden_out = nullptr) const;

 private:
  ModelConfig config_;
  ParameterStore store_;
  EmbeddingParams embedding_;
  TriEncoderParams encoder_;
  JointHeadParams head_;
};

/// Random token ids and labels over the model's inventories; the last
/// position of every odd item is padding.
Batch random_batch(const ModelConfig& config, std::size_t size, std::mt19937_64& rng);

}  // namespace trinlu
