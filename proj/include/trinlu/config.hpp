#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

#include "trinlu/encoder.hpp"
#include "trinlu/joint_head.hpp"
#include "trinlu/tri_encoder.hpp"

namespace trinlu {

// Config files are INI text:
//
//   [model]
//   d = 64
//   length = 20          ; n, tokens per utterance after pad/truncate
//   heads = 4
//   d_ff = 256           ; 0 or absent: 4 * d
//   layers = 2
//   variant = cross      ; noex | cross | bf
//   exchange_layers = first   ; first | last | all
//   activation = relu    ; relu | tanh
//   dropout = 0
//
//   [train]
//   epochs = 20
//   learning_rate = 0.001
//   beta1 = 0.9
//   beta2 = 0.999
//   adam_eps = 1e-8
//   batch_size = 32
//   seed = 1
//   tasks = SF+ID+DC
//   folds = 5
//
// Unknown sections or keys are rejected.
struct TrainConfig {
  std::size_t d = 64;
  std::size_t length = 20;
  std::size_t heads = 4;
  std::size_t d_ff = 0;
  std::size_t layers = 2;
  EncoderVariant variant = EncoderVariant::cross_attention;
  ExchangeLayers exchange = ExchangeLayers::first;
  Activation activation = Activation::relu;
  double dropout = 0.0;

  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  TaskSet tasks;
  std::size_t folds = 5;

  /// Copy with every default materialised (d_ff filled in).
  TrainConfig resolved() const;
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

TrainConfig read_config(std::istream& in);
TrainConfig read_config(const std::filesystem::path& path);
/// Applies one "section.key = value" style override, e.g. ("train", "epochs", "5").
void set_config_value(TrainConfig& config, std::string_view section, std::string_view key,
                      const std::string& value);
std::string write_config(const TrainConfig& config);

nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

std::string to_string(Activation activation);
Activation parse_activation(std::string_view text);

}  // namespace trinlu
