#include <doctest.h>

#include <string>
#include <vector>

#include "trinlu/error.hpp"
#include "trinlu/metrics.hpp"

using namespace trinlu;

namespace {
using Seq = std::vector<std::string>;
}

TEST_CASE("intent accuracy") {
  CHECK(intent_accuracy(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}) == 1.0);
  CHECK(intent_accuracy(std::vector<int>{1, 2, 3, 0}, std::vector<int>{1, 2, 3, 4}) == 0.75);
  CHECK(intent_accuracy(Seq{"affirm+inform"}, Seq{"inform"}) == 0.0);
  CHECK(intent_accuracy(std::vector<int>{}, std::vector<int>{}) == 0.0);
  CHECK_THROWS_AS(intent_accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), ShapeError);
}

TEST_CASE("token-level slot F1") {
  const std::vector<Seq> gold{{"B-a", "O", "B-b"}};
  SUBCASE("one of two slots found") {
    const SlotScores s = slot_token_f1(std::vector<Seq>{{"B-a", "O", "O"}}, gold, {}, std::string("O"));
    CHECK(s.tp == 1);
    CHECK(s.fp == 0);
    CHECK(s.fn == 1);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 0.5);
    CHECK(s.f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));
  }
  SUBCASE("perfect") {
    CHECK(slot_token_f1(gold, gold, {}, std::string("O")).f1 == 1.0);
  }
  SUBCASE("all outside") {
    const SlotScores s = slot_token_f1(std::vector<Seq>{{"O", "O", "O"}}, gold, {}, std::string("O"));
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("a wrong slot label counts against both precision and recall") {
    const SlotScores s = slot_token_f1(std::vector<Seq>{{"B-b", "O", "B-b"}}, gold, {}, std::string("O"));
    CHECK((s.tp == 1 && s.fp == 1 && s.fn == 1));
  }
  SUBCASE("padding is ignored") {
    const SlotScores s = slot_token_f1(std::vector<std::vector<int>>{{1, 2, 2}},
                                       std::vector<std::vector<int>>{{1, 0, 0}},
                                       {{0, 0, 1}}, 0);
    CHECK((s.tp == 1 && s.fp == 1 && s.fn == 0));
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(slot_token_f1(std::vector<Seq>{{"O"}}, gold, {}, std::string("O")), ShapeError);
    CHECK_THROWS_AS(slot_token_f1(std::vector<Seq>{}, gold, {}, std::string("O")), ShapeError);
  }
}

TEST_CASE("scores from counts") {
  const SlotScores s = SlotScores::from_counts(3, 1, 2);
  CHECK(s.precision == 0.75);
  CHECK(s.recall == 0.6);
  CHECK(s.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-15));
  CHECK(SlotScores::from_counts(0, 0, 0).f1 == 0.0);
}
