#include "reference_model.hpp"

#include <cmath>

namespace reference {

using trinlu::ParameterStore;

Mat from_tensor(const trinlu::Tensor& t, std::size_t item) {
  const std::size_t n = t.dim(t.rank() - 2), d = t.cols();
  Mat m(n, Vec(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m[i][j] = t[item * n * d + i * d + j];
  return m;
}

Mat affine(const Mat& x, const ParameterStore& store, const std::string& name) {
  const trinlu::Tensor& w = store.get(name + ".weight").value;
  const trinlu::Tensor& b = store.get(name + ".bias").value;
  const std::size_t in = w.dim(0), out = w.dim(1);
  Mat y(x.size(), Vec(out));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x[r][i] * w[i * out + o];
      y[r][o] = s;
    }
  return y;
}

Vec softmax(const Vec& x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  Vec e(x.size());
  double z = 0;
  for (std::size_t i = 0; i < x.size(); ++i) z += e[i] = std::exp(x[i] - m);
  for (double& v : e) v /= z;
  return e;
}

Mat attention(const Mat& q, const Mat& k, const Mat& v, std::size_t heads,
              const std::vector<bool>& pad) {
  const std::size_t n = q.size(), d = q[0].size(), hd = d / heads;
  Mat out(n, Vec(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i) {
      // Masked keys are dropped outright rather than penalised.
      Vec scores;
      std::vector<std::size_t> keys;
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (pad[j]) continue;
        double s = 0;
        for (std::size_t c = 0; c < hd; ++c) s += q[i][h * hd + c] * k[j][h * hd + c];
        scores.push_back(s / std::sqrt(static_cast<double>(hd)));
        keys.push_back(j);
      }
      const Vec w = softmax(scores);
      for (std::size_t t = 0; t < keys.size(); ++t)
        for (std::size_t c = 0; c < hd; ++c) out[i][h * hd + c] += w[t] * v[keys[t]][h * hd + c];
    }
  return out;
}

Mat layer_norm(const Mat& x, const ParameterStore& store, const std::string& name) {
  const trinlu::Tensor& gain = store.get(name + ".gain").value;
  const trinlu::Tensor& shift = store.get(name + ".shift").value;
  Mat y = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double d = static_cast<double>(x[r].size());
    double mean = 0, var = 0;
    for (double v : x[r]) mean += v / d;
    for (double v : x[r]) var += (v - mean) * (v - mean) / d;
    for (std::size_t c = 0; c < x[r].size(); ++c)
      y[r][c] = gain[c] * (x[r][c] - mean) / std::sqrt(var + 1e-5) + shift[c];
  }
  return y;
}

Mat add(const Mat& a, const Mat& b) {
  Mat y = a;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) y[r][c] += b[r][c];
  return y;
}

Layer encoder_layer(const Mat& x, const ParameterStore& store, const std::string& prefix,
                    std::size_t heads, bool relu, const std::vector<bool>& pad,
                    const std::optional<Mat>& key, const std::optional<Mat>& value,
                    const std::optional<Mat>& ff_input) {
  const Mat q = affine(x, store, prefix + ".query");
  const Mat k = key ? *key : affine(x, store, prefix + ".key");
  const Mat v = value ? *value : affine(x, store, prefix + ".value");
  const Mat attended = affine(attention(q, k, v, heads, pad), store, prefix + ".attn_out");
  const Mat sa_out = layer_norm(add(x, attended), store, prefix + ".norm1");
  Mat inner = affine(ff_input ? *ff_input : sa_out, store, prefix + ".ff_inner");
  for (Vec& row : inner)
    for (double& c : row) c = relu ? std::max(0.0, c) : std::tanh(c);
  const Mat ff = affine(inner, store, prefix + ".ff_outer");
  return {layer_norm(add(sa_out, ff), store, prefix + ".norm2"), sa_out};
}

namespace {

Mat hconcat(const Mat& a, const Mat& b) {
  Mat y = a;
  for (std::size_t r = 0; r < a.size(); ++r) y[r].insert(y[r].end(), b[r].begin(), b[r].end());
  return y;
}

std::string layer_name(const char* stream, int layer) {
  return std::string("encoder.") + stream + "." + std::to_string(layer);
}

Vec flatten(const Mat& m) {
  Vec v;
  for (const Vec& row : m) v.insert(v.end(), row.begin(), row.end());
  return v;
}

Vec affine_vec(const Vec& x, const ParameterStore& store, const std::string& name) {
  return affine(Mat{x}, store, name)[0];
}

}  // namespace

Hidden tri_encoder(const Hidden& e, const ParameterStore& s, Wiring wiring, std::size_t heads,
                   bool relu, const std::vector<bool>& pad) {
  Hidden h;
  const std::string i0 = layer_name("intent", 0), s0 = layer_name("slot", 0),
                    d0 = layer_name("domain", 0);
  if (wiring == Wiring::noex) {
    h.intent = encoder_layer(e.intent, s, i0, heads, relu, pad).hidden;
    h.slot = encoder_layer(e.slot, s, s0, heads, relu, pad).hidden;
    h.domain = encoder_layer(e.domain, s, d0, heads, relu, pad).hidden;
  } else if (wiring == Wiring::cross) {
    const Mat ks = affine(e.slot, s, s0 + ".key"), vs = affine(e.slot, s, s0 + ".value");
    const Mat ki = affine(e.intent, s, i0 + ".key"), vi = affine(e.intent, s, i0 + ".value");
    const Mat kd = affine(e.domain, s, d0 + ".key"), vd = affine(e.domain, s, d0 + ".value");
    h.intent = encoder_layer(e.intent, s, i0, heads, relu, pad, ks, vs).hidden;
    h.domain = encoder_layer(e.domain, s, d0, heads, relu, pad, ks, vs).hidden;
    h.slot = encoder_layer(e.slot, s, s0, heads, relu, pad,
                           affine(hconcat(ki, kd), s, "encoder.merge.0.key"),
                           affine(hconcat(vi, vd), s, "encoder.merge.0.value"))
                 .hidden;
  } else {
    const Mat sa_i = encoder_layer(e.intent, s, i0, heads, relu, pad).sa_out;
    const Mat sa_s = encoder_layer(e.slot, s, s0, heads, relu, pad).sa_out;
    const Mat sa_d = encoder_layer(e.domain, s, d0, heads, relu, pad).sa_out;
    h.intent = encoder_layer(e.intent, s, i0, heads, relu, pad, std::nullopt, std::nullopt, sa_s).hidden;
    h.domain = encoder_layer(e.domain, s, d0, heads, relu, pad, std::nullopt, std::nullopt, sa_s).hidden;
    h.slot = encoder_layer(e.slot, s, s0, heads, relu, pad, std::nullopt, std::nullopt,
                           affine(hconcat(sa_i, sa_d), s, "encoder.merge.0.sa"))
                 .hidden;
  }
  return {encoder_layer(h.intent, s, layer_name("intent", 1), heads, relu, pad).hidden,
          encoder_layer(h.slot, s, layer_name("slot", 1), heads, relu, pad).hidden,
          encoder_layer(h.domain, s, layer_name("domain", 1), heads, relu, pad).hidden};
}

Outputs joint_head(const Hidden& h, const ParameterStore& s) {
  Outputs o;
  Vec hi = flatten(h.intent), hd = flatten(h.domain);
  for (double& v : hi) v = std::tanh(v);
  for (double& v : hd) v = std::tanh(v);
  o.intent_prior = softmax(affine_vec(hi, s, "head.intent"));
  o.domain_prior = softmax(affine_vec(hd, s, "head.domain"));
  for (const Vec& row : h.slot) {
    Vec fused = row;
    fused.insert(fused.end(), o.intent_prior.begin(), o.intent_prior.end());
    fused.insert(fused.end(), o.domain_prior.begin(), o.domain_prior.end());
    o.slots.push_back(softmax(affine_vec(fused, s, "head.slot")));
  }
  Vec joint = flatten(h.slot);
  joint.insert(joint.end(), hi.begin(), hi.end());
  joint.insert(joint.end(), hd.begin(), hd.end());
  o.intent = softmax(affine_vec(joint, s, "head.concat_intent"));
  o.domain = softmax(affine_vec(joint, s, "head.concat_domain"));
  return o;
}

Mat embed(const std::vector<std::size_t>& tokens, const ParameterStore& store,
          const std::string& stream) {
  const trinlu::Tensor& table = store.get("embedding." + stream + ".tokens").value;
  const trinlu::Tensor& positions = store.get("embedding." + stream + ".positions").value;
  const std::size_t d = table.cols();
  Mat m(tokens.size(), Vec(d));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) m[i][c] = table.at(tokens[i], c) + positions.at(i, c);
  return m;
}

}  // namespace reference
