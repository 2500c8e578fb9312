#include <doctest.h>

#include <map>
#include <set>

#include "dialsynth/dialogue_model.hpp"
#include "json_util.hpp"

using namespace dialsynth;

namespace {

// The coherent system -> user intent table, typed in independently.
const std::map<std::string, std::set<std::string>> kTable = {
    {"start", {"inform"}},
    {"inform", {"inform", "update", "reqmore", "confirm", "book"}},
    {"nooffer", {"update", "recheck", "end"}},
    {"select", {"pick", "update", "reqmore"}},
    {"recommend", {"select", "update", "reqmore"}},
    {"request", {"inform"}},
    {"booking_request", {"inform"}},
    {"booking_inform", {"book", "nobook", "update", "reqmore", "inform"}},
    {"offerbooked", {"new_domain", "confirm", "end"}},
    {"booking_book", {"new_domain", "confirm", "end"}},
    {"booking_nobook", {"new_domain", "recheck", "end"}},
};

}  // namespace

TEST_CASE("transition table matches the reference table exactly") {
  std::size_t total = 0;
  for (auto sys : kSystemIntents)
    for (auto user : kUserIntents) {
      const bool expected = kTable.at(std::string(to_string(sys))).count(std::string(to_string(user))) > 0;
      CHECK_MESSAGE(is_valid_transition(sys, user) == expected, to_string(sys), " -> ", to_string(user));
      total += expected;
    }
  CHECK(total == 31);
  CHECK(enumerate_pairs().size() == 31);
}

TEST_CASE("categories partition the transition pairs") {
  std::map<FlowCategory, std::size_t> sizes;
  int percent = 0;
  for (auto c : kFlowCategories) {
    percent += category_percent(c);
    for (const auto& p : compatible_pairs(c)) {
      CHECK(is_valid_transition(p.system, p.user));
      CHECK(category_of(p) == c);
      CHECK(is_compatible(c, p));
    }
    sizes[c] = compatible_pairs(c).size();
  }
  CHECK(percent == 100);
  std::size_t sum = 0;
  for (auto& [_, n] : sizes) sum += n;
  CHECK(sum == 31);
  CHECK(sizes[FlowCategory::starter] == 1);
  CHECK(category_percent(FlowCategory::new_slot_values) == 50);
  CHECK(category_percent(FlowCategory::no_new_state) == 15);
  CHECK(category_percent(FlowCategory::repeat_or_delete) == 5);
  CHECK(category_fraction(FlowCategory::terminator) == doctest::Approx(0.10));
}

TEST_CASE("intent names parse and print") {
  for (auto s : kSystemIntents) CHECK(parse_system_intent(to_string(s)) == s);
  for (auto u : kUserIntents) CHECK(parse_user_intent(to_string(u)) == u);
  for (auto c : kFlowCategories) CHECK(parse_flow_category(to_string(c)) == c);
  CHECK_FALSE(parse_system_intent("hello").has_value());
  CHECK(parse_side("user") == Side::user);
  CHECK_THROWS(parse_side("robot"));
}

TEST_CASE("act modes") {
  CHECK(act_mode(SystemIntent::request) == ActMode::slot_only);
  CHECK(act_mode(SystemIntent::offerbooked) == ActMode::full);
  CHECK(act_mode(SystemIntent::start) == ActMode::bare);
  CHECK(act_mode(UserIntent::reqmore) == ActMode::slot_only);
  CHECK(act_mode(UserIntent::inform) == ActMode::full);
}

TEST_CASE("sampled pairs respect their category") {
  Rng rng(9);
  for (auto c : kFlowCategories)
    for (int i = 0; i < 300; ++i) {
      const IntentPair p = sample_intent_pair(c, rng);
      CHECK(is_compatible(c, p));
    }
}

TEST_CASE("export_transitions lists the table") {
  const auto j = nlohmann::json::parse(export_transitions());
  CHECK(j.at("transitions").at("start") == nlohmann::json::array({"inform"}));
  CHECK(j.at("categories").size() == 6);
}
