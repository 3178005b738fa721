#include "trinlu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "trinlu/error.hpp"
#include "trinlu/trainer.hpp"

namespace trinlu {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw DataError(std::string("checkpoint truncated in ") + what);
  return v;
}

nlohmann::ordered_json header_json(const TrainConfig& config, const LabelVocabs& vocabs,
                                   const ParameterStore& store) {
  nlohmann::ordered_json j;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(config);
  j["vocabs"] = {{"tokens", vocabs.tokens.labels()},
                 {"slots", vocabs.slots.labels()},
                 {"intents", vocabs.intents.labels()},
                 {"domains", vocabs.domains.labels()}};
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < store.count(); ++i)
    params.push_back({{"name", store[i].name}, {"shape", store[i].value.shape()}});
  j["parameters"] = std::move(params);
  return j;
}

}  // namespace

void save_checkpoint(std::ostream& out, const TrainConfig& config, const LabelVocabs& vocabs,
                     const TriNluModel& model) {
  const std::string header = header_json(config, vocabs, model.parameters()).dump();
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const ParameterStore& store = model.parameters();
  for (std::size_t i = 0; i < store.count(); ++i)
    for (double v : store[i].value.data()) put<float>(out, static_cast<float>(v));
  if (!out) throw DataError("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                     const LabelVocabs& vocabs, const TriNluModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  save_checkpoint(out, config, vocabs, model);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::array<char, 12> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw DataError("not a checkpoint file (bad magic)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto length = get<std::uint64_t>(in, "header length");
  if (length > (1ULL << 31)) throw DataError("checkpoint header length implausible");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length)))
    throw DataError("checkpoint truncated in header");

  nlohmann::json header, config_json, listed;
  LabelVocabs vocabs;
  try {
    header = nlohmann::json::parse(text);
    if (header.at("version").get<std::uint32_t>() != version)
      throw DataError("checkpoint header version disagrees with the file version");
    config_json = header.at("config");
    listed = header.at("parameters");
    const auto& v = header.at("vocabs");
    vocabs.tokens = Vocabulary(v.at("tokens").get<std::vector<std::string>>());
    vocabs.slots = Vocabulary(v.at("slots").get<std::vector<std::string>>());
    vocabs.intents = Vocabulary(v.at("intents").get<std::vector<std::string>>());
    vocabs.domains = Vocabulary(v.at("domains").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  const TrainConfig config = config_from_json(config_json);
  TriNluModel model(model_config(config, vocabs), config.seed);
  ParameterStore& store = model.parameters();

  if (listed.size() != store.count())
    throw ConfigError("checkpoint/config mismatch: file stores " + std::to_string(listed.size()) +
                      " parameters, the config builds " + std::to_string(store.count()));
  for (std::size_t i = 0; i < store.count(); ++i) {
    std::string name;
    Shape shape;
    try {
      name = listed.at(i).at("name").get<std::string>();
      shape = listed.at(i).at("shape").get<Shape>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed checkpoint parameter entry: ") + e.what());
    }
    if (name != store[i].name || shape != store[i].value.shape())
      throw ConfigError("checkpoint/config mismatch at parameter " + std::to_string(i) + ": file has " +
                        name + " " + shape_string(shape) + ", config builds " + store[i].name + " " +
                        shape_string(store[i].value.shape()));
  }
  for (std::size_t i = 0; i < store.count(); ++i)
    for (double& v : store[i].value.data()) v = get<float>(in, store[i].name.c_str());
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError("checkpoint has trailing bytes after the last parameter");
  return {config, std::move(vocabs), std::move(model)};
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return load_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void require_same_architecture(const TrainConfig& stored_in, const TrainConfig& requested_in) {
  const TrainConfig a = stored_in.resolved(), b = requested_in.resolved();
  std::string diff;
  auto check = [&diff](const char* field, const auto& x, const auto& y) {
    if (x == y) return;
    std::ostringstream line;
    line << " " << field << " (checkpoint " << x << ", config " << y << ")";
    diff += line.str();
  };
  check("d", a.d, b.d);
  check("length", a.length, b.length);
  check("heads", a.heads, b.heads);
  check("d_ff", a.d_ff, b.d_ff);
  check("layers", a.layers, b.layers);
  check("variant", to_string(a.variant), to_string(b.variant));
  check("exchange_layers", to_string(a.exchange), to_string(b.exchange));
  check("activation", to_string(a.activation), to_string(b.activation));
  if (!diff.empty()) throw ConfigError("checkpoint/config mismatch:" + diff);
}

}  // namespace trinlu
