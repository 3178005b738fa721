#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "trinlu/autodiff.hpp"
#include "trinlu/gradcheck.hpp"
#include "trinlu/model.hpp"

namespace testing {

inline void randomize(trinlu::Parameter& p, std::mt19937_64& rng, double lo = -1.0,
                      double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : p.value.data()) v = dist(rng);
}

inline trinlu::Tensor random_tensor(trinlu::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  trinlu::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline std::vector<trinlu::Parameter*> all_parameters(trinlu::ParameterStore& store) {
  std::vector<trinlu::Parameter*> out;
  for (std::size_t i = 0; i < store.count(); ++i) out.push_back(&store[i]);
  return out;
}

/// sum(y * w) for a fixed random w, so every output component matters.
inline trinlu::Var weighted_sum(trinlu::Graph& g, trinlu::Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return trinlu::sum(trinlu::mul(y, g.constant(random_tensor(y.shape(), rng))));
}

inline trinlu::ModelConfig tiny_config(trinlu::EncoderVariant variant) {
  trinlu::ModelConfig c;
  c.vocab = 16;
  c.length = 4;
  c.d = 8;
  c.heads = 2;
  c.d_ff = 16;
  c.slots = 3;
  c.intents = 2;
  c.domains = 2;
  c.variant = variant;
  return c;
}

inline double max_abs_diff(const trinlu::Tensor& a, const trinlu::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing
