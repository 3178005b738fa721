#include <doctest.h>

#include <sstream>

#include "trinlu/config.hpp"
#include "trinlu/error.hpp"

using namespace trinlu;

namespace {

TrainConfig parse(const std::string& text) {
  std::istringstream in(text);
  return read_config(in);
}

}  // namespace

TEST_CASE("defaults") {
  const TrainConfig c = parse("");
  CHECK(c == TrainConfig{});
  CHECK(c.resolved().d_ff == 256);
  CHECK(c.heads == 4);
}

TEST_CASE("INI parsing") {
  const TrainConfig c = parse(R"(
; desk run
[model]
d = 32
heads = 2
d_ff = 48
variant = bf
exchange_layers = all
activation = tanh
dropout = 0.1

[train]
epochs = 7
learning_rate = 0.0005
tasks = ID+DC
seed = 99
)");
  CHECK(c.d == 32);
  CHECK(c.heads == 2);
  CHECK(c.resolved().d_ff == 48);
  CHECK(c.variant == EncoderVariant::before_feed_forward);
  CHECK(c.exchange == ExchangeLayers::all);
  CHECK(c.activation == Activation::tanh);
  CHECK(c.dropout == 0.1);
  CHECK(c.epochs == 7);
  CHECK(c.learning_rate == 0.0005);
  CHECK(c.tasks == TaskSet{false, true, true});
  CHECK(c.seed == 99);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(parse("[model]\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[optimizer]\nlr = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nd = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nd = 64\nheads = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nvariant = both\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\ntasks = NER\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nfolds = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nbeta1 = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model\nd = 3\n"), ConfigError);
}

TEST_CASE("overrides") {
  TrainConfig c;
  set_config_value(c, "train", "epochs", " 3 ");
  set_config_value(c, "model", "variant", "noex");
  CHECK(c.epochs == 3);
  CHECK(c.variant == EncoderVariant::no_exchange);
  CHECK_THROWS_AS(set_config_value(c, "train", "nope", "1"), ConfigError);
}

TEST_CASE("write and read back") {
  TrainConfig c;
  c.d = 16;
  c.heads = 8;
  c.variant = EncoderVariant::no_exchange;
  c.learning_rate = 0.0123456789012345;
  c.tasks = TaskSet::parse("SF+DC");
  c.seed = 18446744073709551615ull;
  CHECK(parse(write_config(c)) == c.resolved());
}

TEST_CASE("JSON round trip") {
  TrainConfig c;
  c.d_ff = 100;
  c.activation = Activation::tanh;
  c.exchange = ExchangeLayers::last;
  const auto j = to_json(c);
  CHECK(j.begin().key() == "model");
  CHECK(config_from_json(nlohmann::json::parse(j.dump())) == c);
  CHECK(parse_activation(to_string(Activation::relu)) == Activation::relu);
  CHECK_THROWS_AS(parse_activation("gelu"), ConfigError);
}
