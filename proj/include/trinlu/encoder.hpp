#pragma once

// A single transformer encoder layer with the injection points the
// exchange variants need: externally supplied K and V for the attention
// sub-layer, and an external input for the feed-forward sub-layer.
//
// Activations are batched as [B, n, d].

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trinlu/autodiff.hpp"

namespace trinlu {

inline constexpr double kLayerNormEps = 1e-5;

/// Affine map x W + b with W stored as in x out.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in,
                       std::size_t out);
  std::size_t in_features() const { return weight->value.dim(0); }
  std::size_t out_features() const { return weight->value.dim(1); }
  Var operator()(Graph& g, Var x) const;
};

struct NormParams {
  Parameter* gain = nullptr;
  Parameter* shift = nullptr;

  static NormParams create(ParameterStore& store, const std::string& name, std::size_t d);
};

struct EncoderLayerParams {
  Linear query, key, value, output;
  Linear ff_inner, ff_outer;
  NormParams norm1, norm2;
  std::size_t heads = 3;
  Activation activation = Activation::relu;

  static EncoderLayerParams create(ParameterStore& store, const std::string& prefix,
                                   std::size_t d, std::size_t d_ff, std::size_t heads,
                                   Activation activation);
  std::size_t d() const { return query.in_features(); }
  std::size_t head_dim() const { return d() / heads; }
};

/// PAD flags per (batch item, position). Masked keys get zero attention
/// weight from every query.
class AttentionMask {
 public:
  AttentionMask(std::size_t batch, std::size_t length);
  AttentionMask(std::size_t batch, std::size_t length, std::vector<std::uint8_t> pad);

  std::size_t batch() const noexcept { return batch_; }
  std::size_t length() const noexcept { return length_; }
  bool is_pad(std::size_t item, std::size_t position) const {
    return pad_[item * length_ + position] != 0;
  }
  std::size_t unmasked(std::size_t item) const;
  /// Additive score penalty [B, queries, length]: 0 for real keys, a large
  /// negative constant for PAD keys.
  Tensor score_penalty(std::size_t queries) const;

 private:
  std::size_t batch_;
  std::size_t length_;
  std::vector<std::uint8_t> pad_;
};

inline constexpr double kMaskedScore = -1e30;

struct ForwardOptions {
  double dropout = 0.0;            // applied only when rng is set
  std::mt19937_64* rng = nullptr;
  std::vector<Var>* attention_probe = nullptr;  // receives every head's weights
};

struct Projections {
  Var query, key, value;
};

Projections qkv_project(Graph& g, Var x, const EncoderLayerParams& params);

/// Per head: softmax(Q_h K_h^T / sqrt(head_dim) + penalty) V_h; heads are
/// concatenated and passed through the output projection.
Var multi_head_attention(Graph& g, Var query, Var key, Var value, const AttentionMask& mask,
                         const EncoderLayerParams& params, const ForwardOptions& options = {});

Var add_norm(Graph& g, Var residual, Var sublayer_out, const NormParams& norm);

Var feed_forward(Graph& g, Var x, const EncoderLayerParams& params);

struct LayerOverrides {
  std::optional<Projections> own;  // x's projections, when already computed
  std::optional<Var> key;
  std::optional<Var> value;
  std::optional<Var> ff_input;
};

struct LayerOutput {
  Var hidden;
  Var sa_out;  // post Add & Norm attention result
};

/// Q always comes from x. The second Add & Norm adds the FF output to the
/// layer's own sa_out; the FF itself consumes ff_input when supplied.
LayerOutput encoder_layer(Graph& g, Var x, const LayerOverrides& overrides,
                          const AttentionMask& mask, const EncoderLayerParams& params,
                          const ForwardOptions& options = {});

}  // namespace trinlu
