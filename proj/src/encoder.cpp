#include "trinlu/encoder.hpp"

#include <cmath>

#include "trinlu/error.hpp"

namespace trinlu {

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in,
                      std::size_t out) {
  Linear l;
  l.weight = &store.add(name + ".weight", {in, out});
  l.bias = &store.add(name + ".bias", {out});
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  return add(matmul(x, g.param(*weight)), g.param(*bias));
}

NormParams NormParams::create(ParameterStore& store, const std::string& name, std::size_t d) {
  NormParams n;
  n.gain = &store.add(name + ".gain", {d});
  n.shift = &store.add(name + ".shift", {d});
  n.gain->value.fill(1.0);
  return n;
}

EncoderLayerParams EncoderLayerParams::create(ParameterStore& store, const std::string& prefix,
                                              std::size_t d, std::size_t d_ff, std::size_t heads,
                                              Activation activation) {
  if (heads == 0 || d % heads != 0)
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  EncoderLayerParams p;
  p.query = Linear::create(store, prefix + ".query", d, d);
  p.key = Linear::create(store, prefix + ".key", d, d);
  p.value = Linear::create(store, prefix + ".value", d, d);
  p.output = Linear::create(store, prefix + ".attn_out", d, d);
  p.norm1 = NormParams::create(store, prefix + ".norm1", d);
  p.ff_inner = Linear::create(store, prefix + ".ff_inner", d, d_ff);
  p.ff_outer = Linear::create(store, prefix + ".ff_outer", d_ff, d);
  p.norm2 = NormParams::create(store, prefix + ".norm2", d);
  p.heads = heads;
  p.activation = activation;
  return p;
}

AttentionMask::AttentionMask(std::size_t batch, std::size_t length)
    : batch_(batch), length_(length), pad_(batch * length, 0) {}

AttentionMask::AttentionMask(std::size_t batch, std::size_t length, std::vector<std::uint8_t> pad)
    : batch_(batch), length_(length), pad_(std::move(pad)) {
  if (pad_.size() != batch * length)
    throw ShapeError("attention mask has " + std::to_string(pad_.size()) + " flags for " +
                     std::to_string(batch) + "x" + std::to_string(length) + " positions");
  for (std::size_t b = 0; b < batch; ++b)
    if (unmasked(b) == 0)
      throw DataError("batch item " + std::to_string(b) + " consists only of padding");
}

std::size_t AttentionMask::unmasked(std::size_t item) const {
  std::size_t count = 0;
  for (std::size_t t = 0; t < length_; ++t) count += is_pad(item, t) ? 0 : 1;
  return count;
}

Tensor AttentionMask::score_penalty(std::size_t queries) const {
  Tensor penalty({batch_, queries, length_});
  for (std::size_t b = 0; b < batch_; ++b)
    for (std::size_t q = 0; q < queries; ++q)
      for (std::size_t t = 0; t < length_; ++t)
        if (is_pad(b, t)) penalty[(b * queries + q) * length_ + t] = kMaskedScore;
  return penalty;
}

namespace {

void expect_batched(Var x, std::size_t d, const char* what) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[2] != d)
    throw ShapeError(std::string(what) + " must be [B, n, " + std::to_string(d) + "], got " +
                     shape_string(s));
}

}  // namespace

Projections qkv_project(Graph& g, Var x, const EncoderLayerParams& params) {
  expect_batched(x, params.d(), "encoder input");
  return {params.query(g, x), params.key(g, x), params.value(g, x)};
}

Var multi_head_attention(Graph& g, Var query, Var key, Var value, const AttentionMask& mask,
                         const EncoderLayerParams& params, const ForwardOptions& options) {
  const std::size_t d = params.d();
  if (params.heads == 0 || d % params.heads != 0)
    throw ConfigError("model width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(params.heads) + " heads");
  expect_batched(query, d, "attention query");
  expect_batched(key, d, "attention key");
  expect_batched(value, d, "attention value");
  const std::size_t batch = query.shape()[0], queries = query.shape()[1];
  if (key.shape() != value.shape() || key.shape()[0] != batch)
    throw ShapeError("attention key " + shape_string(key.shape()) + " and value " +
                     shape_string(value.shape()) + " disagree with query " +
                     shape_string(query.shape()));
  if (mask.batch() != batch || mask.length() != key.shape()[1])
    throw ShapeError("attention mask does not cover the key positions");

  const std::size_t head_dim = params.head_dim();
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var penalty = g.constant(mask.score_penalty(queries));
  std::vector<Var> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    Var qh = slice_last(query, h * head_dim, head_dim);
    Var kh = slice_last(key, h * head_dim, head_dim);
    Var vh = slice_last(value, h * head_dim, head_dim);
    Var scores = add(scale(bmm(qh, transpose(kh)), scale_factor), penalty);
    Var weights = softmax(scores);
    if (options.attention_probe) options.attention_probe->push_back(weights);
    heads.push_back(bmm(weights, vh));
  }
  return params.output(g, concat(heads, 2));
}

Var add_norm(Graph& g, Var residual, Var sublayer_out, const NormParams& norm) {
  return layer_norm(add(residual, sublayer_out), g.param(*norm.gain), g.param(*norm.shift),
                    kLayerNormEps);
}

Var feed_forward(Graph& g, Var x, const EncoderLayerParams& params) {
  return params.ff_outer(g, elementwise(params.activation, params.ff_inner(g, x)));
}

LayerOutput encoder_layer(Graph& g, Var x, const LayerOverrides& overrides,
                          const AttentionMask& mask, const EncoderLayerParams& params,
                          const ForwardOptions& options) {
  expect_batched(x, params.d(), "encoder input");
  const Projections own = overrides.own ? *overrides.own : qkv_project(g, x, params);
  const Var key = overrides.key.value_or(own.key);
  const Var value = overrides.value.value_or(own.value);

  auto maybe_dropout = [&options](Var v) {
    return options.rng ? dropout(v, options.dropout, *options.rng) : v;
  };

  Var attended = maybe_dropout(multi_head_attention(g, own.query, key, value, mask, params, options));
  Var sa_out = add_norm(g, x, attended, params.norm1);

  Var ff_input = sa_out;
  if (overrides.ff_input) {
    if (overrides.ff_input->shape() != x.shape())
      throw ShapeError("feed-forward override " + shape_string(overrides.ff_input->shape()) +
                       " does not match layer input " + shape_string(x.shape()));
    ff_input = *overrides.ff_input;
  }
  Var ff_out = maybe_dropout(feed_forward(g, ff_input, params));
  return {add_norm(g, sa_out, ff_out, params.norm2), sa_out};
}

}  // namespace trinlu
