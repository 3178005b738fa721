#pragma once

// Three parallel encoder stacks (intent | slot | domain) with the three
// inter-stream wirings:
//
//   no_exchange          streams never see each other.
//   cross_attention      intent and domain attend with the slot stream's K/V;
//                        slot attends with merged (intent, domain) K and V.
//   before_feed_forward  intent and domain FF consume the slot stream's
//                        sa_out; slot FF consumes merged (intent, domain)
//                        sa_out.
//
// Intent and domain never exchange directly here; with exchange limited to
// one stacked layer they also never reach each other through the slot stream.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trinlu/encoder.hpp"

namespace trinlu {

enum class EncoderVariant { no_exchange, cross_attention, before_feed_forward };

/// Which stacked layers carry the variant's exchange.
enum class ExchangeLayers { first, last, all };

std::string_view to_string(EncoderVariant variant);
std::string_view to_string(ExchangeLayers layers);
EncoderVariant parse_variant(std::string_view text);
ExchangeLayers parse_exchange_layers(std::string_view text);

struct TriEncoderConfig {
  std::size_t d = 768;
  std::size_t d_ff = 3072;
  std::size_t heads = 3;
  std::size_t layers = 2;
  EncoderVariant variant = EncoderVariant::cross_attention;
  ExchangeLayers exchange = ExchangeLayers::first;
  Activation activation = Activation::relu;

  bool exchanges_at(std::size_t layer) const;
};

struct MergeParams {
  std::optional<Linear> key;    // cross_attention
  std::optional<Linear> value;  // cross_attention
  std::optional<Linear> sa;     // before_feed_forward
};

struct TriEncoderParams {
  std::vector<EncoderLayerParams> intent, slot, domain;
  std::vector<MergeParams> merges;  // one per stacked layer; empty when not exchanging
  TriEncoderConfig config;

  static TriEncoderParams create(ParameterStore& store, const TriEncoderConfig& config);
};

struct TriHidden {
  Var intent, slot, domain;
};

/// Concatenates left and right along the feature axis and projects 2d -> d.
Var kv_merge(Graph& g, Var left, Var right, const Linear& merge);

TriHidden tri_forward(Graph& g, EncoderVariant variant, const TriHidden& embedded,
                      const AttentionMask& mask, const TriEncoderParams& params,
                      const ForwardOptions& options = {});

}  // namespace trinlu
