#include <doctest.h>

#include <cstring>
#include <sstream>

#include "trinlu/checkpoint.hpp"
#include "trinlu/error.hpp"
#include "trinlu/synthetic.hpp"
#include "trinlu/trainer.hpp"

using namespace trinlu;

namespace {

struct Saved {
  TrainConfig config;
  LabelVocabs vocabs;
  std::string bytes;
  std::vector<Tensor> values;
};

Saved saved() {
  Saved s;
  s.config.d = 8;
  s.config.length = 4;
  s.config.heads = 2;
  s.config.variant = EncoderVariant::before_feed_forward;
  s.vocabs = LabelVocabs::build(make_synthetic_corpus(SyntheticSpec{}));
  const TriNluModel model(model_config(s.config, s.vocabs), 3);
  std::ostringstream out;
  save_checkpoint(out, s.config, s.vocabs, model);
  s.bytes = out.str();
  for (std::size_t i = 0; i < model.parameters().count(); ++i)
    s.values.push_back(model.parameters()[i].value);
  return s;
}

Checkpoint load(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_checkpoint(in);
}

/// Rewrites the JSON header through edit and re-frames the file.
template <typename Edit>
std::string with_header(const std::string& bytes, Edit edit) {
  std::uint64_t length = 0;
  std::memcpy(&length, bytes.data() + 16, 8);
  auto header = nlohmann::json::parse(bytes.substr(24, length));
  edit(header);
  const std::string text = header.dump();
  const std::uint64_t new_length = text.size();
  std::string out = bytes.substr(0, 16);
  out.append(reinterpret_cast<const char*>(&new_length), 8);
  return out + text + bytes.substr(24 + length);
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  const Saved s = saved();
  CHECK(s.bytes.compare(0, 12, std::string(kCheckpointMagic.data(), 12)) == 0);
  const Checkpoint c = load(s.bytes);
  CHECK(c.config == s.config.resolved());
  CHECK(c.vocabs == s.vocabs);
  REQUIRE(c.model.parameters().count() == s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const Tensor& got = c.model.parameters()[i].value;
    REQUIRE(got.shape() == s.values[i].shape());
    for (std::size_t k = 0; k < got.size(); ++k)
      CHECK(got[k] == static_cast<double>(static_cast<float>(s.values[i][k])));
  }
}

TEST_CASE("damaged checkpoints") {
  const Saved s = saved();
  CHECK_THROWS_AS(load(s.bytes.substr(0, s.bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(load(s.bytes + "x"), DataError);
  CHECK_THROWS_AS(load("TRINLU-EMB"), DataError);
  std::string bad_magic = s.bytes;
  bad_magic[1] = 'X';
  CHECK_THROWS_AS(load(bad_magic), DataError);
  CHECK_THROWS_AS(load(with_header(s.bytes, [](auto& h) { h["version"] = 9; })), DataError);
}

TEST_CASE("stored shapes must match the stored architecture") {
  const Saved s = saved();
  const std::string wider = with_header(s.bytes, [](auto& h) { h["config"]["model"]["d"] = 16; });
  CHECK_THROWS_WITH_AS(load(wider), doctest::Contains("checkpoint/config mismatch"), ConfigError);
  const std::string renamed = with_header(s.bytes, [](auto& h) {
    h["parameters"][0]["name"] = "embedding.other.tokens";
  });
  CHECK_THROWS_AS(load(renamed), ConfigError);
}

TEST_CASE("architecture comparison") {
  TrainConfig a, b;
  b.epochs = 99;
  b.learning_rate = 0.5;
  CHECK_NOTHROW(require_same_architecture(a, b));
  b.heads = 8;
  b.variant = EncoderVariant::no_exchange;
  try {
    require_same_architecture(a, b);
    FAIL("expected a mismatch");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("heads") != std::string::npos);
    CHECK(what.find("variant") != std::string::npos);
  }
}
