#include <doctest.h>

#include <set>

#include "dialsynth/errors.hpp"
#include "dialsynth/schema.hpp"

using namespace dialsynth;

namespace {

const char* kTiny = R"({
  "version": "t1",
  "domains": [
    {"name": "hotel", "slots": [
      {"name": "area", "kind": "categorical", "values": ["north", "south"], "informable": true, "requestable": true},
      {"name": "parking", "kind": "boolean", "values": ["yes", "no"], "informable": true, "requestable": false},
      {"name": "phone", "kind": "open", "values": ["01223"], "informable": false, "requestable": true}
    ]}
  ]
})";

}  // namespace

TEST_CASE("builtin schema has the five domains and validates") {
  const Schema& s = builtin_schema();
  CHECK(s.domain_names() == std::vector<std::string>{"attraction", "hotel", "restaurant", "taxi", "train"});
  CHECK_NOTHROW(validate_schema(s));
  CHECK(load_schema(write_schema(s)) == s);
}

TEST_CASE("load_schema parses a small document") {
  const Schema s = load_schema(kTiny);
  CHECK(s.version == "t1");
  REQUIRE(s.find_slot("hotel", "parking"));
  CHECK(s.find_slot("hotel", "parking")->kind == SlotKind::boolean);
  CHECK(s.find_slot("hotel", "nope") == nullptr);
  CHECK_THROWS_AS(s.domain("taxi"), std::out_of_range);
  CHECK(eligible_slots(s.domain("hotel"), SlotRole::informable).size() == 2);
  CHECK(eligible_slots(s.domain("hotel"), SlotRole::requestable).size() == 2);
}

TEST_CASE("schema errors name the offending path") {
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(load_schema("{"), ParseError); }
  SUBCASE("unknown field") {
    try {
      load_schema(R"({"version":"x","domains":[],"extra":1})");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("extra") != std::string::npos);
    }
  }
  SUBCASE("empty value list") {
    std::string doc = kTiny;
    doc.replace(doc.find(R"(["01223"])"), 9, "[]");
    CHECK_THROWS_AS(load_schema(doc), ValidationError);
  }
  SUBCASE("bad boolean value") {
    std::string doc = kTiny;
    doc.replace(doc.find(R"(["yes", "no"])"), 13, R"(["maybe"])");
    CHECK_THROWS_AS(load_schema(doc), ValidationError);
  }
  SUBCASE("duplicate domain") {
    const std::string doc = R"({"version":"x","domains":[
      {"name":"a","slots":[{"name":"s","kind":"open","values":["v"],"informable":true,"requestable":false}]},
      {"name":"a","slots":[{"name":"s","kind":"open","values":["v"],"informable":true,"requestable":false}]}]})";
    CHECK_THROWS_AS(load_schema(doc), ValidationError);
  }
}

TEST_CASE("sample_slot_values draws distinct eligible slots") {
  const Schema& s = builtin_schema();
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    auto svs = sample_slot_values(s, "hotel", 4, SlotRole::informable, rng);
    REQUIRE(svs.size() == 4);
    std::set<std::string> slots;
    for (const auto& sv : svs) {
      slots.insert(sv.slot);
      CHECK(validate_value(s, sv));
      CHECK(s.find_slot("hotel", sv.slot)->informable);
    }
    CHECK(slots.size() == 4);
  }
  CHECK_THROWS_AS(sample_slot_values(s, "hotel", 100, SlotRole::informable, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_slot_values(s, "spaceport", 1, SlotRole::informable, rng), std::out_of_range);
}

TEST_CASE("time values") {
  CHECK(is_time_value("09:15"));
  CHECK(is_time_value("23:59"));
  CHECK_FALSE(is_time_value("24:00"));
  CHECK_FALSE(is_time_value("9:15"));
  CHECK_FALSE(is_time_value("12:60"));
}

TEST_CASE("validate_value rejects values outside the inventory") {
  const Schema& s = builtin_schema();
  CHECK_FALSE(validate_value(s, {"hotel", "area", "moon"}));
  CHECK_FALSE(validate_value(s, {"hotel", "colour", "red"}));
}
