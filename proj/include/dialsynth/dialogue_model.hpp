#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dialsynth/rng.hpp"

namespace dialsynth {

enum class SystemIntent : std::uint8_t {
  start,
  inform,
  nooffer,
  select,
  recommend,
  request,
  booking_request,
  booking_inform,
  offerbooked,
  booking_book,
  booking_nobook,
};

enum class UserIntent : std::uint8_t {
  inform,
  update,
  reqmore,
  confirm,
  book,
  recheck,
  end,
  pick,
  select,
  nobook,
  new_domain,
};

/// Exchange archetypes that govern the corpus mixture.
enum class FlowCategory : std::uint8_t {
  new_slot_values,
  no_new_state,
  starter,
  terminator,
  update_existing,
  repeat_or_delete,
};

enum class Side : std::uint8_t { system, user };

/// How much of (domain, slot, value) an act carries.
enum class ActMode : std::uint8_t { full, slot_only, bare };

using Intent = std::variant<SystemIntent, UserIntent>;

inline constexpr std::array<SystemIntent, 11> kSystemIntents = {
    SystemIntent::start,          SystemIntent::inform,         SystemIntent::nooffer,
    SystemIntent::select,         SystemIntent::recommend,      SystemIntent::request,
    SystemIntent::booking_request, SystemIntent::booking_inform, SystemIntent::offerbooked,
    SystemIntent::booking_book,   SystemIntent::booking_nobook,
};

inline constexpr std::array<UserIntent, 11> kUserIntents = {
    UserIntent::inform,  UserIntent::update, UserIntent::reqmore, UserIntent::confirm,
    UserIntent::book,    UserIntent::recheck, UserIntent::end,    UserIntent::pick,
    UserIntent::select,  UserIntent::nobook, UserIntent::new_domain,
};

inline constexpr std::array<FlowCategory, 6> kFlowCategories = {
    FlowCategory::new_slot_values, FlowCategory::no_new_state,    FlowCategory::starter,
    FlowCategory::terminator,      FlowCategory::update_existing, FlowCategory::repeat_or_delete,
};

std::string_view to_string(SystemIntent intent);
std::string_view to_string(UserIntent intent);
std::string_view to_string(FlowCategory category);
std::string_view to_string(Side side);
std::string_view to_string(ActMode mode);
std::string_view to_string(const Intent& intent);

std::optional<SystemIntent> parse_system_intent(std::string_view name);
std::optional<UserIntent> parse_user_intent(std::string_view name);
std::optional<FlowCategory> parse_flow_category(std::string_view name);
/// Throws std::invalid_argument for anything but "system" / "user".
Side parse_side(std::string_view name);

inline Side side_of(const Intent& intent) {
  return std::holds_alternative<SystemIntent>(intent) ? Side::system : Side::user;
}

struct IntentPair {
  SystemIntent system;
  UserIntent user;

  friend bool operator==(const IntentPair&, const IntentPair&) = default;
};

/// Orders by intent names, not enum values.
bool name_less(const IntentPair& a, const IntentPair& b);

/// The user intents that coherently follow a system intent. Never empty.
std::span<const UserIntent> allowed_user_intents(SystemIntent sys);
bool is_valid_transition(SystemIntent sys, UserIntent user);

/// Every valid transition, ordered lexicographically by (system, user) name.
std::vector<IntentPair> enumerate_pairs();

/// Target share of each category in percent (50/15/10/10/10/5).
int category_percent(FlowCategory category);
double category_fraction(FlowCategory category);

/// The category an intent pair realizes. The six categories partition the
/// transition table, so each pair belongs to exactly one.
FlowCategory category_of(IntentPair pair);
bool is_compatible(FlowCategory category, IntentPair pair);
std::vector<IntentPair> compatible_pairs(FlowCategory category);

/// Uniform over the pairs compatible with the category.
IntentPair sample_intent_pair(FlowCategory category, Rng& rng);

ActMode act_mode(SystemIntent intent);
ActMode act_mode(UserIntent intent);
ActMode act_mode(const Intent& intent);

/// The transition table and category map as a JSON document.
std::string export_transitions();

}  // namespace dialsynth
