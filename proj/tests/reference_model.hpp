#pragma once

// Straight-line re-implementation of the model with plain loops over
// std::vector, one utterance at a time. Reads parameters by name from a
// store and shares no code with the library beyond the store itself.

#include <optional>
#include <string>
#include <vector>

#include "trinlu/autodiff.hpp"

namespace reference {

using Mat = std::vector<std::vector<double>>;  // rows x cols
using Vec = std::vector<double>;

Mat from_tensor(const trinlu::Tensor& t, std::size_t item = 0);  // item-th [n, d] slice
Mat affine(const Mat& x, const trinlu::ParameterStore& store, const std::string& name);
Mat attention(const Mat& q, const Mat& k, const Mat& v, std::size_t heads,
              const std::vector<bool>& pad);
Mat layer_norm(const Mat& x, const trinlu::ParameterStore& store, const std::string& name);
Mat add(const Mat& a, const Mat& b);
Vec softmax(const Vec& x);

struct Layer {
  Mat hidden;
  Mat sa_out;
};

/// prefix names one stacked layer, e.g. "encoder.intent.0".
Layer encoder_layer(const Mat& x, const trinlu::ParameterStore& store, const std::string& prefix,
                    std::size_t heads, bool relu, const std::vector<bool>& pad,
                    const std::optional<Mat>& key = std::nullopt,
                    const std::optional<Mat>& value = std::nullopt,
                    const std::optional<Mat>& ff_input = std::nullopt);

struct Hidden {
  Mat intent, slot, domain;
};

enum class Wiring { noex, cross, bf };

/// Two stacked layers; exchange only in the first.
Hidden tri_encoder(const Hidden& embedded, const trinlu::ParameterStore& store, Wiring wiring,
                   std::size_t heads, bool relu, const std::vector<bool>& pad);

struct Outputs {
  Mat slots;  // n x n_s
  Vec intent, domain, intent_prior, domain_prior;
};

Outputs joint_head(const Hidden& h, const trinlu::ParameterStore& store);

/// Token + position embedding of one utterance for one stream.
Mat embed(const std::vector<std::size_t>& tokens, const trinlu::ParameterStore& store,
          const std::string& stream);

}  // namespace reference
