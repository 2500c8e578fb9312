#pragma once

#include <compare>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dialsynth/rng.hpp"

namespace dialsynth {

enum class SlotKind { categorical, open, boolean, time };
enum class SlotRole { informable, requestable };

std::string_view to_string(SlotKind kind);
std::string_view to_string(SlotRole role);

struct SlotSpec {
  std::string name;
  SlotKind kind = SlotKind::categorical;
  std::vector<std::string> values;
  bool informable = true;
  bool requestable = false;

  bool eligible(SlotRole role) const {
    return role == SlotRole::informable ? informable : requestable;
  }
  /// Booking slots carry reservation details ("book day", "book people", ...).
  bool is_booking() const { return name.rfind("book", 0) == 0; }

  friend bool operator==(const SlotSpec&, const SlotSpec&) = default;
};

struct DomainSpec {
  std::string name;
  std::vector<SlotSpec> slots;

  const SlotSpec* find(std::string_view slot) const;

  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct SlotValue {
  std::string domain;
  std::string slot;
  std::string value;

  /// "domain-slot", the key used in serialized dialogue states.
  std::string key() const { return domain + "-" + slot; }

  friend auto operator<=>(const SlotValue&, const SlotValue&) = default;
  friend bool operator==(const SlotValue&, const SlotValue&) = default;
};

/// Immutable after load; all invariants are checked by `validate_schema`.
struct Schema {
  std::string version;
  std::vector<DomainSpec> domains;

  const DomainSpec* find_domain(std::string_view name) const;
  /// Throws std::out_of_range for an unknown domain.
  const DomainSpec& domain(std::string_view name) const;
  const SlotSpec* find_slot(std::string_view domain, std::string_view slot) const;
  std::vector<std::string> domain_names() const;

  friend bool operator==(const Schema&, const Schema&) = default;
};

/// Throws ParseError (malformed JSON, unknown field, wrong type) or
/// ValidationError (invariant violation), each naming the offending path.
Schema load_schema(std::string_view document);
Schema load_schema_file(const std::filesystem::path& path);
std::string write_schema(const Schema& schema);

/// Checks every Schema invariant in place; throws ValidationError.
void validate_schema(const Schema& schema);

/// Five-domain MultiWOZ-style schema (attraction, hotel, restaurant, taxi, train).
const Schema& builtin_schema();
std::string_view builtin_schema_document();

std::vector<const SlotSpec*> eligible_slots(const DomainSpec& domain, SlotRole role);

/// Booking slots of the domain; informable slots when the domain has none.
std::vector<const SlotSpec*> booking_slots(const DomainSpec& domain);

/// `count` slot-values over distinct eligible slots, values drawn uniformly
/// from each slot's inventory. Throws std::out_of_range for an unknown domain
/// and std::invalid_argument when count exceeds the eligible slots.
std::vector<SlotValue> sample_slot_values(const Schema& schema, std::string_view domain,
                                          std::size_t count, SlotRole role, Rng& rng);

bool validate_value(const Schema& schema, const SlotValue& sv);

/// True for "HH:MM" with HH in 00..23 and MM in 00..59.
bool is_time_value(std::string_view value);

}  // namespace dialsynth
