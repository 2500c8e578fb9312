#include <doctest.h>

#include "dialsynth/errors.hpp"
#include "dialsynth/schema.hpp"
#include "dialsynth/structure.hpp"

using namespace dialsynth;

TEST_CASE("apply inserts, overrides and deletes") {
  DialogueState h{{{"hotel", "area"}, "north"}, {{"hotel", "stars"}, "4"}};
  TurnDelta d;
  d.updates.set({"hotel", "area"}, "south");
  d.updates.set({"hotel", "parking"}, "yes");
  d.deletions.insert({"hotel", "stars"});
  const DialogueState out = apply(h, d);
  CHECK(out == DialogueState{{{"hotel", "area"}, "south"}, {{"hotel", "parking"}, "yes"}});
  CHECK(h.size() == 2);
  TurnDelta repeat;
  repeat.updates.set({"hotel", "area"}, "north");
  CHECK(apply(h, repeat) == h);
}

TEST_CASE("SlotKey parsing") {
  CHECK(SlotKey::parse("hotel-book day") == SlotKey{"hotel", "book day"});
  CHECK(SlotKey{"train", "leaveat"}.str() == "train-leaveat");
  CHECK_THROWS(SlotKey::parse("nodash"));
}

TEST_CASE("synthesized structures satisfy every invariant") {
  const Schema& schema = builtin_schema();
  for (auto c : kFlowCategories)
    for (const auto& d : schema.domain_names())
      for (std::uint64_t i = 0; i < 60; ++i) {
        const auto r = synthesize_structure(schema, c, d, 17, i);
        const DialogueStructure& s = r.structure;
        CHECK(structure_violations(schema, s).empty());
        CHECK(s.flow_category == c);
        CHECK(s.domain == d);
        CHECK(is_compatible(c, s.intents()));
        CHECK(apply(s.history, s.turn_delta) == s.full_state);
        if (c == FlowCategory::starter) CHECK(s.history.empty());
        if (c == FlowCategory::no_new_state || c == FlowCategory::terminator)
          CHECK(s.full_state == s.history);
        if (c == FlowCategory::update_existing) {
          bool overrides = false;
          for (const auto& [k, v] : s.turn_delta.updates) {
            const std::string* old = s.history.find(k);
            overrides = overrides || (old && *old != v);
          }
          CHECK(overrides);
        }
      }
}

TEST_CASE("synthesis is deterministic per seed and index") {
  const Schema& schema = builtin_schema();
  const auto a = synthesize_structure(schema, FlowCategory::new_slot_values, "hotel", 5, 3);
  const auto b = synthesize_structure(schema, FlowCategory::new_slot_values, "hotel", 5, 3);
  CHECK(a.structure == b.structure);
  CHECK(a.attempt == b.attempt);
}

TEST_CASE("forced pairs and single-slot acts") {
  const Schema& schema = builtin_schema();
  SynthesisOptions opts;
  opts.single_slot = true;
  opts.forced_pair = IntentPair{SystemIntent::recommend, UserIntent::select};
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto s = synthesize_structure(schema, FlowCategory::new_slot_values, "restaurant", 1, i, opts).structure;
    CHECK(s.intents() == *opts.forced_pair);
    for (const auto& a : s.system_acts) CHECK(a.slot_values.size() <= 1);
    for (const auto& a : s.user_acts) CHECK(a.slot_values.size() <= 1);
  }
  opts.forced_pair = IntentPair{SystemIntent::start, UserIntent::inform};
  CHECK_THROWS(synthesize_structure(schema, FlowCategory::terminator, "hotel", 1, 0, opts));
}

TEST_CASE("structure_violations reports a broken structure") {
  const Schema& schema = builtin_schema();
  auto s = synthesize_structure(schema, FlowCategory::new_slot_values, "hotel", 2, 0).structure;
  s.full_state.set({"hotel", "area"}, "nowhere");
  CHECK_FALSE(structure_violations(schema, s).empty());
}

TEST_CASE("update over an empty history cannot be sampled") {
  const Schema& schema = builtin_schema();
  Rng rng(4);
  const auto sys = sample_system_act(schema, {}, SystemIntent::inform, "hotel", rng);
  CHECK_THROWS_AS(sample_user_act(schema, {}, sys, UserIntent::update, FlowCategory::update_existing, rng),
                  ConstraintError);
}
