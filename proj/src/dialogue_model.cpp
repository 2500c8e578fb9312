#include "dialsynth/dialogue_model.hpp"

#include <algorithm>
#include <stdexcept>

#include "json_util.hpp"

namespace dialsynth {

namespace {

using SI = SystemIntent;
using UI = UserIntent;

constexpr std::array<UI, 1> kFromStart = {UI::inform};
constexpr std::array<UI, 5> kFromInform = {UI::inform, UI::update, UI::reqmore, UI::confirm,
                                           UI::book};
constexpr std::array<UI, 3> kFromNooffer = {UI::update, UI::recheck, UI::end};
constexpr std::array<UI, 3> kFromSelect = {UI::pick, UI::update, UI::reqmore};
constexpr std::array<UI, 3> kFromRecommend = {UI::select, UI::update, UI::reqmore};
constexpr std::array<UI, 1> kFromRequest = {UI::inform};
constexpr std::array<UI, 1> kFromBookingRequest = {UI::inform};
constexpr std::array<UI, 5> kFromBookingInform = {UI::book, UI::nobook, UI::update, UI::reqmore,
                                                  UI::inform};
constexpr std::array<UI, 3> kFromOfferbooked = {UI::new_domain, UI::confirm, UI::end};
constexpr std::array<UI, 3> kFromBookingBook = {UI::new_domain, UI::confirm, UI::end};
constexpr std::array<UI, 3> kFromBookingNobook = {UI::new_domain, UI::recheck, UI::end};

}  // namespace

std::string_view to_string(SystemIntent intent) {
  switch (intent) {
    case SI::start: return "start";
    case SI::inform: return "inform";
    case SI::nooffer: return "nooffer";
    case SI::select: return "select";
    case SI::recommend: return "recommend";
    case SI::request: return "request";
    case SI::booking_request: return "booking_request";
    case SI::booking_inform: return "booking_inform";
    case SI::offerbooked: return "offerbooked";
    case SI::booking_book: return "booking_book";
    case SI::booking_nobook: return "booking_nobook";
  }
  return "?";
}

std::string_view to_string(UserIntent intent) {
  switch (intent) {
    case UI::inform: return "inform";
    case UI::update: return "update";
    case UI::reqmore: return "reqmore";
    case UI::confirm: return "confirm";
    case UI::book: return "book";
    case UI::recheck: return "recheck";
    case UI::end: return "end";
    case UI::pick: return "pick";
    case UI::select: return "select";
    case UI::nobook: return "nobook";
    case UI::new_domain: return "new_domain";
  }
  return "?";
}

std::string_view to_string(FlowCategory category) {
  switch (category) {
    case FlowCategory::new_slot_values: return "new_slot_values";
    case FlowCategory::no_new_state: return "no_new_state";
    case FlowCategory::starter: return "starter";
    case FlowCategory::terminator: return "terminator";
    case FlowCategory::update_existing: return "update_existing";
    case FlowCategory::repeat_or_delete: return "repeat_or_delete";
  }
  return "?";
}

std::string_view to_string(Side side) { return side == Side::system ? "system" : "user"; }

std::string_view to_string(ActMode mode) {
  switch (mode) {
    case ActMode::full: return "full";
    case ActMode::slot_only: return "slot_only";
    case ActMode::bare: return "bare";
  }
  return "?";
}

std::string_view to_string(const Intent& intent) {
  return std::visit([](auto i) { return to_string(i); }, intent);
}

std::optional<SystemIntent> parse_system_intent(std::string_view name) {
  for (auto i : kSystemIntents)
    if (to_string(i) == name) return i;
  return std::nullopt;
}

std::optional<UserIntent> parse_user_intent(std::string_view name) {
  for (auto i : kUserIntents)
    if (to_string(i) == name) return i;
  return std::nullopt;
}

std::optional<FlowCategory> parse_flow_category(std::string_view name) {
  for (auto c : kFlowCategories)
    if (to_string(c) == name) return c;
  return std::nullopt;
}

Side parse_side(std::string_view name) {
  if (name == "system") return Side::system;
  if (name == "user") return Side::user;
  throw std::invalid_argument("role must be 'system' or 'user', got '" + std::string(name) + "'");
}

bool name_less(const IntentPair& a, const IntentPair& b) {
  auto as = to_string(a.system), bs = to_string(b.system);
  if (as != bs) return as < bs;
  return to_string(a.user) < to_string(b.user);
}

std::span<const UserIntent> allowed_user_intents(SystemIntent sys) {
  switch (sys) {
    case SI::start: return kFromStart;
    case SI::inform: return kFromInform;
    case SI::nooffer: return kFromNooffer;
    case SI::select: return kFromSelect;
    case SI::recommend: return kFromRecommend;
    case SI::request: return kFromRequest;
    case SI::booking_request: return kFromBookingRequest;
    case SI::booking_inform: return kFromBookingInform;
    case SI::offerbooked: return kFromOfferbooked;
    case SI::booking_book: return kFromBookingBook;
    case SI::booking_nobook: return kFromBookingNobook;
  }
  return {};
}

bool is_valid_transition(SystemIntent sys, UserIntent user) {
  auto allowed = allowed_user_intents(sys);
  return std::find(allowed.begin(), allowed.end(), user) != allowed.end();
}

std::vector<IntentPair> enumerate_pairs() {
  std::vector<IntentPair> out;
  for (auto sys : kSystemIntents)
    for (auto user : allowed_user_intents(sys)) out.push_back({sys, user});
  std::sort(out.begin(), out.end(), name_less);
  return out;
}

int category_percent(FlowCategory category) {
  switch (category) {
    case FlowCategory::new_slot_values: return 50;
    case FlowCategory::no_new_state: return 15;
    case FlowCategory::starter: return 10;
    case FlowCategory::terminator: return 10;
    case FlowCategory::update_existing: return 10;
    case FlowCategory::repeat_or_delete: return 5;
  }
  return 0;
}

double category_fraction(FlowCategory category) { return category_percent(category) / 100.0; }

FlowCategory category_of(IntentPair pair) {
  if (pair.system == SI::start) return FlowCategory::starter;
  switch (pair.user) {
    case UI::end: return FlowCategory::terminator;
    case UI::confirm:
    case UI::reqmore: return FlowCategory::no_new_state;
    case UI::update: return FlowCategory::update_existing;
    case UI::recheck:
    case UI::nobook: return FlowCategory::repeat_or_delete;
    case UI::inform:
    case UI::book:
    case UI::pick:
    case UI::select:
    case UI::new_domain: return FlowCategory::new_slot_values;
  }
  return FlowCategory::new_slot_values;
}

bool is_compatible(FlowCategory category, IntentPair pair) {
  return is_valid_transition(pair.system, pair.user) && category_of(pair) == category;
}

std::vector<IntentPair> compatible_pairs(FlowCategory category) {
  std::vector<IntentPair> out;
  for (const auto& p : enumerate_pairs())
    if (category_of(p) == category) out.push_back(p);
  return out;
}

IntentPair sample_intent_pair(FlowCategory category, Rng& rng) {
  static const std::array<std::vector<IntentPair>, 6> table = [] {
    std::array<std::vector<IntentPair>, 6> t;
    for (auto c : kFlowCategories) {
      t[static_cast<std::size_t>(c)] = compatible_pairs(c);
      if (t[static_cast<std::size_t>(c)].empty())
        throw std::logic_error("flow category without compatible intent pairs");
    }
    return t;
  }();
  return rng.pick(table[static_cast<std::size_t>(category)]);
}

ActMode act_mode(SystemIntent intent) {
  switch (intent) {
    case SI::start: return ActMode::bare;
    case SI::request:
    case SI::booking_request: return ActMode::slot_only;
    default: return ActMode::full;
  }
}

ActMode act_mode(UserIntent intent) {
  switch (intent) {
    case UI::confirm:
    case UI::end: return ActMode::bare;
    case UI::reqmore: return ActMode::slot_only;
    default: return ActMode::full;
  }
}

ActMode act_mode(const Intent& intent) {
  return std::visit([](auto i) { return act_mode(i); }, intent);
}

std::string export_transitions() {
  jsonutil::ordered_json root;
  root["system_intents"] = jsonutil::ordered_json::array();
  for (auto s : kSystemIntents) root["system_intents"].push_back(std::string(to_string(s)));
  root["user_intents"] = jsonutil::ordered_json::array();
  for (auto u : kUserIntents) root["user_intents"].push_back(std::string(to_string(u)));
  jsonutil::ordered_json table = jsonutil::ordered_json::object();
  for (auto s : kSystemIntents) {
    auto row = jsonutil::ordered_json::array();
    for (auto u : allowed_user_intents(s)) row.push_back(std::string(to_string(u)));
    table[std::string(to_string(s))] = std::move(row);
  }
  root["transitions"] = std::move(table);
  jsonutil::ordered_json cats = jsonutil::ordered_json::object();
  for (auto c : kFlowCategories) {
    jsonutil::ordered_json cj;
    cj["percent"] = category_percent(c);
    cj["pairs"] = jsonutil::ordered_json::array();
    for (const auto& p : compatible_pairs(c))
      cj["pairs"].push_back({std::string(to_string(p.system)), std::string(to_string(p.user))});
    cats[std::string(to_string(c))] = std::move(cj);
  }
  root["categories"] = std::move(cats);
  jsonutil::ordered_json modes = jsonutil::ordered_json::object();
  for (auto s : kSystemIntents)
    modes["system." + std::string(to_string(s))] = std::string(to_string(act_mode(s)));
  for (auto u : kUserIntents)
    modes["user." + std::string(to_string(u))] = std::string(to_string(act_mode(u)));
  root["act_modes"] = std::move(modes);
  return root.dump(2) + "\n";
}

}  // namespace dialsynth
