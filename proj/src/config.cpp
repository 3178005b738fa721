#include "trinlu/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

#include "trinlu/error.hpp"

namespace trinlu {

namespace {

template <typename T>
T parse_number(std::string_view key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("invalid value '" + text + "' for " + std::string(key));
  return value;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

}  // namespace

std::string to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(text) + "' (expected relu or tanh)");
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig c = *this;
  if (c.d_ff == 0) c.d_ff = 4 * c.d;
  return c;
}

void TrainConfig::validate() const {
  if (d == 0 || length == 0 || layers == 0) throw ConfigError("d, length and layers must be positive");
  if (heads == 0 || d % heads != 0)
    throw ConfigError("d = " + std::to_string(d) + " must be divisible by heads = " +
                      std::to_string(heads));
  if (tasks.empty()) throw ConfigError("at least one of SF, ID, DC must be active");
  if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be positive");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (folds < 2) throw ConfigError("folds must be at least 2");
}

void set_config_value(TrainConfig& c, std::string_view section, std::string_view key,
                      const std::string& raw) {
  const std::string value = trim(raw);
  const std::string name = std::string(section) + "." + std::string(key);
  if (section == "model") {
    if (key == "d") c.d = parse_number<std::size_t>(name, value);
    else if (key == "length") c.length = parse_number<std::size_t>(name, value);
    else if (key == "heads") c.heads = parse_number<std::size_t>(name, value);
    else if (key == "d_ff") c.d_ff = parse_number<std::size_t>(name, value);
    else if (key == "layers") c.layers = parse_number<std::size_t>(name, value);
    else if (key == "variant") c.variant = parse_variant(value);
    else if (key == "exchange_layers") c.exchange = parse_exchange_layers(value);
    else if (key == "activation") c.activation = parse_activation(value);
    else if (key == "dropout") c.dropout = parse_number<double>(name, value);
    else throw ConfigError("unknown config key '" + name + "'");
  } else if (section == "train") {
    if (key == "epochs") c.epochs = parse_number<std::size_t>(name, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(name, value);
    else if (key == "beta1") c.beta1 = parse_number<double>(name, value);
    else if (key == "beta2") c.beta2 = parse_number<double>(name, value);
    else if (key == "adam_eps") c.adam_eps = parse_number<double>(name, value);
    else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(name, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(name, value);
    else if (key == "tasks") c.tasks = TaskSet::parse(value);
    else if (key == "folds") c.folds = parse_number<std::size_t>(name, value);
    else throw ConfigError("unknown config key '" + name + "'");
  } else {
    throw ConfigError("unknown config section '[" + std::string(section) + "]'");
  }
}

TrainConfig read_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("unparseable config: ") + e.what());
  }
  TrainConfig c;
  for (const auto& [section, entries] : tree) {
    if (!entries.data().empty())
      throw ConfigError("config key '" + section + "' must sit inside [model] or [train]");
    for (const auto& [key, value] : entries) set_config_value(c, section, key, value.data());
  }
  c.validate();
  return c;
}

TrainConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return read_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string write_config(const TrainConfig& config) {
  const TrainConfig c = config.resolved();
  std::ostringstream out;
  out.precision(17);
  out << "[model]\n"
      << "d = " << c.d << "\nlength = " << c.length << "\nheads = " << c.heads
      << "\nd_ff = " << c.d_ff << "\nlayers = " << c.layers
      << "\nvariant = " << to_string(c.variant)
      << "\nexchange_layers = " << to_string(c.exchange)
      << "\nactivation = " << to_string(c.activation) << "\ndropout = " << c.dropout << "\n\n"
      << "[train]\n"
      << "epochs = " << c.epochs << "\nlearning_rate = " << c.learning_rate
      << "\nbeta1 = " << c.beta1 << "\nbeta2 = " << c.beta2 << "\nadam_eps = " << c.adam_eps
      << "\nbatch_size = " << c.batch_size << "\nseed = " << c.seed
      << "\ntasks = " << c.tasks.label() << "\nfolds = " << c.folds << "\n";
  return out.str();
}

nlohmann::ordered_json to_json(const TrainConfig& config) {
  const TrainConfig c = config.resolved();
  nlohmann::ordered_json j;
  j["model"] = {{"d", c.d},
                {"length", c.length},
                {"heads", c.heads},
                {"d_ff", c.d_ff},
                {"layers", c.layers},
                {"variant", std::string(to_string(c.variant))},
                {"exchange_layers", std::string(to_string(c.exchange))},
                {"activation", to_string(c.activation)},
                {"dropout", c.dropout}};
  j["train"] = {{"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_eps", c.adam_eps},
                {"batch_size", c.batch_size},
                {"seed", c.seed},
                {"tasks", c.tasks.label()},
                {"folds", c.folds}};
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    for (const char* section : {"model", "train"})
      for (const auto& [key, value] : j.at(section).items())
        set_config_value(c, section, key, value.is_string() ? value.get<std::string>() : value.dump());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config record: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace trinlu
