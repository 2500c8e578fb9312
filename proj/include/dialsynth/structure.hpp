#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialsynth/dialogue_model.hpp"
#include "dialsynth/rng.hpp"
#include "dialsynth/schema.hpp"

namespace dialsynth {

/// Serialized value that marks a slot removed by the turn.
inline constexpr std::string_view kDeleteSentinel = "[DELETE]";

struct SlotKey {
  std::string domain;
  std::string slot;

  std::string str() const { return domain + "-" + slot; }
  /// Splits "domain-slot" at the first '-'; throws std::invalid_argument.
  static SlotKey parse(std::string_view key);

  friend bool operator<(const SlotKey& a, const SlotKey& b) { return a.str() < b.str(); }
  friend bool operator==(const SlotKey&, const SlotKey&) = default;
};

/// Belief state: at most one value per (domain, slot), iterated in
/// "domain-slot" order.
class DialogueState {
 public:
  using Map = std::map<SlotKey, std::string>;

  DialogueState() = default;
  DialogueState(std::initializer_list<std::pair<const SlotKey, std::string>> init) : map_(init) {}

  void set(SlotKey key, std::string value) { map_[std::move(key)] = std::move(value); }
  void set(const SlotValue& sv) { set({sv.domain, sv.slot}, sv.value); }
  bool erase(const SlotKey& key) { return map_.erase(key) > 0; }
  const std::string* find(const SlotKey& key) const;
  bool contains(const SlotKey& key) const { return map_.count(key) > 0; }

  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }
  Map::const_iterator begin() const { return map_.begin(); }
  Map::const_iterator end() const { return map_.end(); }
  const Map& entries() const { return map_; }

  std::set<std::string> domains() const;
  DialogueState restricted_to(std::string_view domain) const;
  std::vector<SlotValue> slot_values() const;

  friend bool operator==(const DialogueState&, const DialogueState&) = default;

 private:
  Map map_;
};

/// Turn-level change: inserted or overridden entries plus removed keys.
struct TurnDelta {
  DialogueState updates;
  std::set<SlotKey> deletions;

  bool empty() const { return updates.empty() && deletions.empty(); }
  friend bool operator==(const TurnDelta&, const TurnDelta&) = default;
};

/// Overrides replace, additions insert, then deletions remove.
DialogueState apply(const DialogueState& history, const TurnDelta& delta);

struct DialogueAct {
  Intent intent;
  std::string domain;
  ActMode mode = ActMode::full;
  /// slot_only acts carry empty values; bare acts carry none.
  std::vector<SlotValue> slot_values;

  Side side() const { return side_of(intent); }
  friend bool operator==(const DialogueAct&, const DialogueAct&) = default;
};

struct DialogueStructure {
  FlowCategory flow_category = FlowCategory::new_slot_values;
  std::string domain;
  DialogueState history;
  std::vector<DialogueAct> system_acts;
  std::vector<DialogueAct> user_acts;
  TurnDelta turn_delta;
  DialogueState full_state;

  IntentPair intents() const;
  friend bool operator==(const DialogueStructure&, const DialogueStructure&) = default;
};

struct SynthesisOptions {
  /// Restrict every non-bare act to one slot-value (unique-flow enumeration).
  bool single_slot = false;
  /// Use this pair instead of sampling one; must be compatible with the category.
  std::optional<IntentPair> forced_pair;
  unsigned max_attempts = 32;
};

/// Empty for starters and `start`; otherwise 1-4 informable slot-values of
/// `domain`, count uniform. Throws std::out_of_range for an unknown domain.
DialogueState synthesize_history(const Schema& schema, SystemIntent sys, FlowCategory category,
                                 std::string_view domain, Rng& rng);

std::vector<DialogueAct> sample_system_act(const Schema& schema, const DialogueState& history,
                                           SystemIntent sys, std::string_view domain, Rng& rng,
                                           const SynthesisOptions& options = {});

/// Throws ConstraintError when the history cannot support the intent under
/// the category (e.g. update over an empty history); callers resample.
std::vector<DialogueAct> sample_user_act(const Schema& schema, const DialogueState& history,
                                         std::span<const DialogueAct> system_acts, UserIntent user,
                                         FlowCategory category, Rng& rng,
                                         const SynthesisOptions& options = {});

/// Applies each user intent's state effect. `history` is not modified.
std::pair<TurnDelta, DialogueState> derive_turn_state(const DialogueState& history,
                                                      std::span<const DialogueAct> user_acts);

struct SynthesisResult {
  DialogueStructure structure;
  unsigned attempt = 0;
};

/// Attempt `a` draws from derive_seed(master_seed, sample_index, a). Throws
/// ResampleExhausted after `options.max_attempts` failed attempts.
SynthesisResult synthesize_structure(const Schema& schema, FlowCategory category,
                                     std::string_view domain, std::uint64_t master_seed,
                                     std::uint64_t sample_index,
                                     const SynthesisOptions& options = {});

DialogueStructure synthesize_structure(const Schema& schema, FlowCategory category,
                                       std::string_view domain, Rng& rng,
                                       const SynthesisOptions& options = {});

/// Every violated DialogueStructure invariant, as readable messages.
std::vector<std::string> structure_violations(const Schema& schema, const DialogueStructure& s);

}  // namespace dialsynth
