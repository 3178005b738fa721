#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "trinlu/convert.hpp"
#include "trinlu/error.hpp"

using namespace trinlu;
namespace fs = std::filesystem;

namespace {

using Labels = std::vector<std::string>;

constexpr const char* kM2m = R"([
 {"dialogue_id": "r1", "turns": [
   {"system_utterance": {"tokens": ["hello", "there"], "slots": []},
    "system_acts": [{"type": "GREETING"}],
    "user_utterance": {"tokens": ["table", "at", "Cafe", "Rio"],
                       "slots": [{"slot": "restaurant_name", "start": 2, "exclusive_end": 4}]},
    "user_acts": [{"type": "INFORM", "slot": "restaurant_name", "value": "Cafe Rio"},
                  {"type": "AFFIRM"}]},
   {"system_utterance": {"tokens": [], "slots": []}, "system_acts": [{"type": "OFFER"}],
    "user_utterance": {"text": "Thanks bye", "slots": []}, "user_acts": []}
 ]}
])";

constexpr const char* kWozDialogues = R"([
 {"dialogue_id": "MUL1.json", "turns": [
   {"turn_id": "0", "speaker": "USER", "utterance": "I need a cheap hotel and a taxi.",
    "frames": [{"service": "hotel", "slots": [
      {"slot": "hotel-pricerange", "value": "cheap", "start": 9, "exclusive_end": 14}]}]},
   {"turn_id": "1", "speaker": "SYSTEM", "utterance": "Sure.", "frames": []},
   {"turn_id": "2", "speaker": "USER", "utterance": "Book the Alpha-Milton please",
    "frames": [{"service": "hotel", "slots": [
      {"slot": "hotel-name", "value": "alpha", "start": 9, "exclusive_end": 14}]}]},
   {"turn_id": "3", "speaker": "USER", "utterance": "Nothing else", "frames": []}
 ]}
])";

constexpr const char* kWozActs = R"({
 "MUL1.json": {
   "0": {"dialog_act": {"Hotel-Inform": [["Price", "cheap"]], "Taxi-Request": [["Leave", "?"]]}},
   "1": {"dialog_act": {"general-welcome": []}},
   "2": {"dialog_act": {"Hotel-Inform": [["Name", "alpha"]]}},
   "3": {"dialog_act": {}}
 }
})";

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("trinlu_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("M2M turns become utterances") {
  const ConversionResult r = convert_m2m_json(kM2m, "restaurant");
  REQUIRE(r.utterances.size() == 2);
  const Utterance& system = r.utterances[0];
  CHECK(system.tokens == Labels{"hello", "there"});
  CHECK(system.intent == "greeting");
  CHECK(system.domain == "restaurant");
  CHECK(system.turn == 0);
  const Utterance& user = r.utterances[1];
  CHECK(user.tokens == Labels{"table", "at", "cafe", "rio"});
  CHECK(user.slots == Labels{"O", "O", "B-restaurant_name", "I-restaurant_name"});
  CHECK(user.intent == "affirm+inform");
  CHECK(user.turn == 1);
  CHECK(r.report.skipped_empty == 1);
  CHECK(r.report.skipped_no_act == 1);
  CHECK(r.report.records == 2);
  CHECK(r.report.candidates() == 4);
  CHECK(r.report.text().find("greeting") != std::string::npos);
}

TEST_CASE("M2M speaker filters and domain") {
  ConvertOptions users_only;
  users_only.system_turns = false;
  const ConversionResult r = convert_m2m_json(kM2m, "movie", users_only);
  REQUIRE(r.utterances.size() == 1);
  CHECK(r.utterances[0].domain == "movie");
  CHECK(m2m_domain_from_path("data/sim-R/train.json") == "restaurant");
  CHECK(m2m_domain_from_path("data/sim-M/dev.json") == "movie");
  CHECK(!m2m_domain_from_path("data/other/dev.json"));
  CHECK_THROWS_AS(convert_m2m_json(kM2m, ""), DataError);
  CHECK_THROWS_AS(convert_m2m_json("{}", "movie"), DataError);
  CHECK_THROWS_AS(convert_m2m_json("[{\"turns\": []}]", "movie"), DataError);
}

TEST_CASE("M2M directories and splits") {
  TempDir dir("m2m");
  write(dir.path / "sim-R" / "train.json", kM2m);
  write(dir.path / "sim-M" / "train.json", kM2m);
  write(dir.path / "sim-M" / "test.json", kM2m);
  ConvertOptions train;
  train.split = "train";
  const ConversionResult r = convert_m2m(dir.path, train);
  CHECK(r.report.files.size() == 2);
  CHECK(r.report.domains.at("movie") == 2);
  CHECK(r.report.domains.at("restaurant") == 2);
  ConvertOptions missing;
  missing.split = "dev";
  CHECK_THROWS_WITH_AS(convert_m2m(dir.path, missing), doctest::Contains("no dialogue files found"),
                       DataError);
  CHECK_THROWS_AS(convert_m2m(dir.path / "absent"), DataError);
}

TEST_CASE("character spans align to whitespace tokens") {
  const std::vector<SlotSpan> spans{{9, 14, "price"}};
  const auto aligned = align_char_spans("I need a cheap hotel.", spans);
  REQUIRE(aligned);
  CHECK(aligned->at(0).start == 3);
  CHECK(aligned->at(0).end == 4);
  const std::vector<SlotSpan> trailing{{15, 20, "type"}};
  CHECK(align_char_spans("I need a cheap hotel.", trailing)->at(0).start == 4);
  const std::vector<SlotSpan> inside{{9, 12, "x"}};
  CHECK(!align_char_spans("I need a cheap hotel.", inside));
}

TEST_CASE("MultiWOZ turns become utterances") {
  const ConversionResult r = convert_multiwoz_json(kWozDialogues, kWozActs);
  REQUIRE(r.utterances.size() == 2);
  const Utterance& first = r.utterances[0];
  CHECK(first.tokens == Labels{"i", "need", "a", "cheap", "hotel", "and", "a", "taxi."});
  CHECK(first.slots == Labels{"O", "O", "O", "B-pricerange", "O", "O", "O", "O"});
  CHECK(first.intent == "inform+request");
  CHECK(first.domain == "hotel+taxi");
  CHECK(first.turn == 0);
  // "Alpha-Milton" is one token; the span ends inside it.
  CHECK(r.report.skipped_misaligned == 1);
  CHECK(r.report.misaligned_examples == Labels{"MUL1.json/2"});
  CHECK(r.report.skipped_no_act == 1);
  CHECK(r.utterances[1].intent == "welcome");
  CHECK(r.utterances[1].domain == "general");

  ConvertOptions users_only;
  users_only.system_turns = false;
  CHECK(convert_multiwoz_json(kWozDialogues, kWozActs, users_only).utterances.size() == 1);
}

TEST_CASE("MultiWOZ directory layout") {
  TempDir dir("woz");
  write(dir.path / "dialog_acts.json", kWozActs);
  write(dir.path / "train" / "dialogues_001.json", kWozDialogues);
  write(dir.path / "test" / "dialogues_001.json", kWozDialogues);
  ConvertOptions test;
  test.split = "test";
  const ConversionResult r = convert_multiwoz(dir.path, test);
  CHECK(r.report.files.size() == 1);
  CHECK(r.utterances.size() == 2);
  CHECK(convert_multiwoz(dir.path / "train" / "dialogues_001.json").utterances.size() == 2);

  TempDir bare("woz_bare");
  write(bare.path / "train" / "dialogues_001.json", kWozDialogues);
  CHECK_THROWS_WITH_AS(convert_multiwoz(bare.path), doctest::Contains("dialog_acts.json"),
                       DataError);
}
