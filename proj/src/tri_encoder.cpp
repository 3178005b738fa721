#include "trinlu/tri_encoder.hpp"

#include "trinlu/error.hpp"

namespace trinlu {

std::string_view to_string(EncoderVariant variant) {
  switch (variant) {
    case EncoderVariant::no_exchange: return "noex";
    case EncoderVariant::cross_attention: return "cross";
    case EncoderVariant::before_feed_forward: return "bf";
  }
  return "?";
}

std::string_view to_string(ExchangeLayers layers) {
  switch (layers) {
    case ExchangeLayers::first: return "first";
    case ExchangeLayers::last: return "last";
    case ExchangeLayers::all: return "all";
  }
  return "?";
}

EncoderVariant parse_variant(std::string_view text) {
  if (text == "noex" || text == "NoEx") return EncoderVariant::no_exchange;
  if (text == "cross" || text == "Cross") return EncoderVariant::cross_attention;
  if (text == "bf" || text == "BF") return EncoderVariant::before_feed_forward;
  throw ConfigError("unknown encoder variant '" + std::string(text) + "' (noex|cross|bf)");
}

ExchangeLayers parse_exchange_layers(std::string_view text) {
  if (text == "first") return ExchangeLayers::first;
  if (text == "last") return ExchangeLayers::last;
  if (text == "all") return ExchangeLayers::all;
  throw ConfigError("unknown exchange layer setting '" + std::string(text) + "' (first|last|all)");
}

bool TriEncoderConfig::exchanges_at(std::size_t layer) const {
  if (variant == EncoderVariant::no_exchange) return false;
  switch (exchange) {
    case ExchangeLayers::first: return layer == 0;
    case ExchangeLayers::last: return layer + 1 == layers;
    case ExchangeLayers::all: return true;
  }
  return false;
}

TriEncoderParams TriEncoderParams::create(ParameterStore& store, const TriEncoderConfig& config) {
  if (config.layers == 0) throw ConfigError("encoder stacks need at least one layer");
  TriEncoderParams p;
  p.config = config;
  const std::array<std::pair<const char*, std::vector<EncoderLayerParams>*>, 3> streams{
      {{"intent", &p.intent}, {"slot", &p.slot}, {"domain", &p.domain}}};
  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    for (auto [name, stack] : streams)
      stack->push_back(EncoderLayerParams::create(
          store, std::string("encoder.") + name + "." + std::to_string(layer), config.d,
          config.d_ff, config.heads, config.activation));
    MergeParams merge;
    if (config.exchanges_at(layer)) {
      const std::string prefix = "encoder.merge." + std::to_string(layer);
      if (config.variant == EncoderVariant::cross_attention) {
        merge.key = Linear::create(store, prefix + ".key", 2 * config.d, config.d);
        merge.value = Linear::create(store, prefix + ".value", 2 * config.d, config.d);
      } else {
        merge.sa = Linear::create(store, prefix + ".sa", 2 * config.d, config.d);
      }
    }
    p.merges.push_back(merge);
  }
  return p;
}

Var kv_merge(Graph& g, Var left, Var right, const Linear& merge) {
  if (left.shape() != right.shape())
    throw ShapeError("merge inputs " + shape_string(left.shape()) + " and " +
                     shape_string(right.shape()) + " differ");
  return merge(g, concat({left, right}, left.shape().size() - 1));
}

namespace {

TriHidden no_exchange_layer(Graph& g, const TriHidden& x, std::size_t layer,
                            const AttentionMask& mask, const TriEncoderParams& p,
                            const ForwardOptions& options) {
  return {encoder_layer(g, x.intent, {}, mask, p.intent[layer], options).hidden,
          encoder_layer(g, x.slot, {}, mask, p.slot[layer], options).hidden,
          encoder_layer(g, x.domain, {}, mask, p.domain[layer], options).hidden};
}

TriHidden cross_layer(Graph& g, const TriHidden& x, std::size_t layer, const AttentionMask& mask,
                      const TriEncoderParams& p, const ForwardOptions& options) {
  const MergeParams& merge = p.merges[layer];
  if (!merge.key || !merge.value)
    throw ConfigError("cross-attention merge parameters missing for layer " +
                      std::to_string(layer));
  const Projections intent = qkv_project(g, x.intent, p.intent[layer]);
  const Projections slot = qkv_project(g, x.slot, p.slot[layer]);
  const Projections domain = qkv_project(g, x.domain, p.domain[layer]);

  LayerOverrides from_slot;
  from_slot.key = slot.key;
  from_slot.value = slot.value;
  from_slot.own = intent;
  Var h_intent = encoder_layer(g, x.intent, from_slot, mask, p.intent[layer], options).hidden;
  from_slot.own = domain;
  Var h_domain = encoder_layer(g, x.domain, from_slot, mask, p.domain[layer], options).hidden;

  LayerOverrides merged;
  merged.own = slot;
  merged.key = kv_merge(g, intent.key, domain.key, *merge.key);
  merged.value = kv_merge(g, intent.value, domain.value, *merge.value);
  Var h_slot = encoder_layer(g, x.slot, merged, mask, p.slot[layer], options).hidden;
  return {h_intent, h_slot, h_domain};
}

Var maybe_dropout(Var v, const ForwardOptions& options) {
  return options.rng ? dropout(v, options.dropout, *options.rng) : v;
}

// The FF override needs every stream's sa_out before any FF runs, so the
// layer is assembled from the sub-layer functions rather than encoder_layer.
TriHidden before_ff_layer(Graph& g, const TriHidden& x, std::size_t layer,
                          const AttentionMask& mask, const TriEncoderParams& p,
                          const ForwardOptions& options) {
  const MergeParams& merge = p.merges[layer];
  if (!merge.sa)
    throw ConfigError("before-feed-forward merge parameters missing for layer " +
                      std::to_string(layer));
  auto self_attend = [&](Var input, const EncoderLayerParams& params) {
    const Projections qkv = qkv_project(g, input, params);
    Var attended = maybe_dropout(
        multi_head_attention(g, qkv.query, qkv.key, qkv.value, mask, params, options), options);
    return add_norm(g, input, attended, params.norm1);
  };
  auto finish = [&](Var sa_out, Var ff_input, const EncoderLayerParams& params) {
    Var ff_out = maybe_dropout(feed_forward(g, ff_input, params), options);
    return add_norm(g, sa_out, ff_out, params.norm2);
  };
  const Var sa_intent = self_attend(x.intent, p.intent[layer]);
  const Var sa_slot = self_attend(x.slot, p.slot[layer]);
  const Var sa_domain = self_attend(x.domain, p.domain[layer]);
  const Var slot_ff_input = kv_merge(g, sa_intent, sa_domain, *merge.sa);
  return {finish(sa_intent, sa_slot, p.intent[layer]),
          finish(sa_slot, slot_ff_input, p.slot[layer]),
          finish(sa_domain, sa_slot, p.domain[layer])};
}

}  // namespace

TriHidden tri_forward(Graph& g, EncoderVariant variant, const TriHidden& embedded,
                      const AttentionMask& mask, const TriEncoderParams& params,
                      const ForwardOptions& options) {
  if (embedded.intent.shape() != embedded.slot.shape() ||
      embedded.domain.shape() != embedded.slot.shape())
    throw ShapeError("tri-encoder streams disagree in shape");
  if (variant != params.config.variant && variant != EncoderVariant::no_exchange)
    throw ConfigError("parameters were built for variant " +
                      std::string(to_string(params.config.variant)) + ", not " +
                      std::string(to_string(variant)));
  TriHidden h = embedded;
  for (std::size_t layer = 0; layer < params.config.layers; ++layer) {
    const bool exchange = variant != EncoderVariant::no_exchange && params.config.exchanges_at(layer);
    if (!exchange)
      h = no_exchange_layer(g, h, layer, mask, params, options);
    else if (variant == EncoderVariant::cross_attention)
      h = cross_layer(g, h, layer, mask, params, options);
    else
      h = before_ff_layer(g, h, layer, mask, params, options);
  }
  return h;
}

}  // namespace trinlu
