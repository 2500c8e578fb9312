#include "dialsynth/structure.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "dialsynth/errors.hpp"

namespace dialsynth {

SlotKey SlotKey::parse(std::string_view key) {
  auto dash = key.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == key.size())
    throw std::invalid_argument("malformed slot key '" + std::string(key) + "'");
  return {std::string(key.substr(0, dash)), std::string(key.substr(dash + 1))};
}

const std::string* DialogueState::find(const SlotKey& key) const {
  auto it = map_.find(key);
  return it == map_.end() ? nullptr : &it->second;
}

std::set<std::string> DialogueState::domains() const {
  std::set<std::string> out;
  for (const auto& [k, _] : map_) out.insert(k.domain);
  return out;
}

DialogueState DialogueState::restricted_to(std::string_view domain) const {
  DialogueState out;
  for (const auto& [k, v] : map_)
    if (k.domain == domain) out.set(k, v);
  return out;
}

std::vector<SlotValue> DialogueState::slot_values() const {
  std::vector<SlotValue> out;
  out.reserve(map_.size());
  for (const auto& [k, v] : map_) out.push_back({k.domain, k.slot, v});
  return out;
}

DialogueState apply(const DialogueState& history, const TurnDelta& delta) {
  DialogueState out = history;
  for (const auto& [k, v] : delta.updates) out.set(k, v);
  for (const auto& k : delta.deletions) out.erase(k);
  return out;
}

IntentPair DialogueStructure::intents() const {
  return {std::get<SystemIntent>(system_acts.at(0).intent),
          std::get<UserIntent>(user_acts.at(0).intent)};
}

namespace {

using SlotList = std::vector<const SlotSpec*>;

std::size_t act_size(std::size_t available, Rng& rng, const SynthesisOptions& options) {
  if (available == 0) throw ConstraintError("no eligible slots for act");
  const std::size_t hi = options.single_slot ? 1 : std::min<std::size_t>(2, available);
  return rng.between(1, hi);
}

SlotList absent_from(const SlotList& slots, const std::string& domain,
                     const DialogueState& history) {
  SlotList out;
  for (const auto* s : slots)
    if (!history.contains({domain, s->name})) out.push_back(s);
  return out;
}

std::vector<SlotValue> draw(const std::string& domain, const SlotList& slots, std::size_t count,
                            Rng& rng, bool with_values) {
  std::vector<SlotValue> out;
  for (std::size_t idx : rng.choose(slots.size(), count))
    out.push_back({domain, slots[idx]->name, with_values ? rng.pick(slots[idx]->values) : ""});
  return out;
}

// History entries of `domain` (optionally only those whose slot passes
// `keep`). Entries named by the system act come first when any exist.
std::vector<SlotValue> history_entries(const DialogueState& history, const std::string& domain,
                                       const std::vector<SlotValue>& mentioned,
                                       const std::function<bool(const SlotValue&)>& keep) {
  std::vector<SlotValue> all, preferred;
  for (const auto& sv : history.slot_values()) {
    if (sv.domain != domain || !keep(sv)) continue;
    all.push_back(sv);
    for (const auto& m : mentioned)
      if (m.domain == sv.domain && m.slot == sv.slot) preferred.push_back(sv);
  }
  return preferred.empty() ? all : preferred;
}

std::vector<SlotValue> pick_entries(const std::vector<SlotValue>& candidates, Rng& rng,
                                    const SynthesisOptions& options) {
  const std::size_t n = act_size(candidates.size(), rng, options);
  std::vector<SlotValue> out;
  for (std::size_t idx : rng.choose(candidates.size(), n)) out.push_back(candidates[idx]);
  return out;
}

bool category_holds(FlowCategory category, const DialogueState& history, const TurnDelta& delta) {
  switch (category) {
    case FlowCategory::new_slot_values:
      for (const auto& [k, _] : delta.updates)
        if (!history.contains(k)) return true;
      return false;
    case FlowCategory::no_new_state: return delta.empty();
    case FlowCategory::starter: return history.empty();
    case FlowCategory::terminator: return true;
    case FlowCategory::update_existing:
      if (delta.updates.empty()) return false;
      for (const auto& [k, v] : delta.updates) {
        const auto* old = history.find(k);
        if (!old || *old == v) return false;
      }
      return true;
    case FlowCategory::repeat_or_delete: {
      if (!delta.deletions.empty()) return true;
      for (const auto& [k, v] : delta.updates) {
        const auto* old = history.find(k);
        if (old && *old == v) return true;
      }
      return false;
    }
  }
  return false;
}

}  // namespace

DialogueState synthesize_history(const Schema& schema, SystemIntent sys, FlowCategory category,
                                 std::string_view domain, Rng& rng) {
  const DomainSpec& d = schema.domain(domain);
  DialogueState history;
  if (category == FlowCategory::starter || sys == SystemIntent::start) return history;
  const auto informable = eligible_slots(d, SlotRole::informable);
  if (informable.empty()) throw ConstraintError("domain '" + d.name + "' has no informable slots");
  const std::size_t n = rng.between(1, std::min<std::size_t>(4, informable.size()));
  for (const auto& sv : sample_slot_values(schema, d.name, n, SlotRole::informable, rng))
    history.set(sv);
  return history;
}

std::vector<DialogueAct> sample_system_act(const Schema& schema, const DialogueState& history,
                                           SystemIntent sys, std::string_view domain, Rng& rng,
                                           const SynthesisOptions& options) {
  const DomainSpec& d = schema.domain(domain);
  DialogueAct act{sys, d.name, act_mode(sys), {}};
  const auto informable = eligible_slots(d, SlotRole::informable);
  const auto booking = booking_slots(d);
  auto sized_draw = [&](const SlotList& slots, bool with_values) {
    return draw(d.name, slots, act_size(slots.size(), rng, options), rng, with_values);
  };

  switch (sys) {
    case SystemIntent::start: break;
    case SystemIntent::inform: act.slot_values = sized_draw(informable, true); break;
    case SystemIntent::nooffer: {
      auto entries = history_entries(history, d.name, {}, [](const SlotValue&) { return true; });
      act.slot_values = entries.empty() ? sized_draw(informable, true)
                                        : pick_entries(entries, rng, options);
      break;
    }
    case SystemIntent::select:
    case SystemIntent::recommend:
      act.slot_values = sized_draw(absent_from(informable, d.name, history), true);
      break;
    case SystemIntent::request:
      act.slot_values = sized_draw(absent_from(informable, d.name, history), false);
      break;
    case SystemIntent::booking_request:
      act.slot_values = sized_draw(absent_from(booking, d.name, history), false);
      break;
    case SystemIntent::booking_inform: {
      auto open = absent_from(booking, d.name, history);
      act.slot_values = sized_draw(open.empty() ? booking : open, true);
      break;
    }
    case SystemIntent::offerbooked:
    case SystemIntent::booking_book:
    case SystemIntent::booking_nobook:
      // Reservation details echo the user's constraints where they exist.
      act.slot_values = sized_draw(booking, true);
      for (auto& sv : act.slot_values)
        if (const auto* v = history.find({sv.domain, sv.slot})) sv.value = *v;
      break;
  }
  return {std::move(act)};
}

std::vector<DialogueAct> sample_user_act(const Schema& schema, const DialogueState& history,
                                         std::span<const DialogueAct> system_acts, UserIntent user,
                                         FlowCategory category, Rng& rng,
                                         const SynthesisOptions& options) {
  if (system_acts.empty()) throw std::invalid_argument("sample_user_act: no system act");
  const DialogueAct& sys_act = system_acts.front();
  const auto sys = std::get<SystemIntent>(sys_act.intent);
  if (!is_valid_transition(sys, user))
    throw std::invalid_argument("invalid transition " + std::string(to_string(sys)) + " -> " +
                                std::string(to_string(user)));
  const DomainSpec& d = schema.domain(sys_act.domain);
  DialogueAct act{user, d.name, act_mode(user), {}};
  const auto informable = eligible_slots(d, SlotRole::informable);
  const auto booking = booking_slots(d);
  auto sized_draw = [&](const SlotList& slots, bool with_values) {
    return draw(d.name, slots, act_size(slots.size(), rng, options), rng, with_values);
  };
  auto any = [](const SlotValue&) { return true; };

  switch (user) {
    case UserIntent::inform:
      if (sys == SystemIntent::request || sys == SystemIntent::booking_request) {
        for (const auto& asked : sys_act.slot_values) {
          const SlotSpec* spec = d.find(asked.slot);
          act.slot_values.push_back({d.name, asked.slot, rng.pick(spec->values)});
        }
      } else {
        act.slot_values = sized_draw(absent_from(informable, d.name, history), true);
      }
      break;
    case UserIntent::update: {
      auto candidates = history_entries(history, d.name, sys_act.slot_values, [&](const SlotValue& sv) {
        return d.find(sv.slot)->values.size() >= 2;
      });
      act.slot_values = pick_entries(candidates, rng, options);
      for (auto& sv : act.slot_values) {
        std::vector<std::string> alternatives;
        for (const auto& v : d.find(sv.slot)->values)
          if (v != sv.value) alternatives.push_back(v);
        sv.value = rng.pick(alternatives);
      }
      break;
    }
    case UserIntent::reqmore:
      act.slot_values = sized_draw(eligible_slots(d, SlotRole::requestable), false);
      break;
    case UserIntent::confirm:
    case UserIntent::end: break;
    case UserIntent::book: {
      std::vector<SlotValue> offered;
      if (sys == SystemIntent::booking_inform)
        for (const auto& sv : sys_act.slot_values)
          if (!history.contains({sv.domain, sv.slot})) offered.push_back(sv);
      if (!offered.empty()) {
        act.slot_values = offered;
      } else {
        auto open = absent_from(booking, d.name, history);
        if (open.empty()) open = absent_from(informable, d.name, history);
        act.slot_values = sized_draw(open, true);
      }
      if (options.single_slot && act.slot_values.size() > 1) act.slot_values.resize(1);
      break;
    }
    case UserIntent::recheck:
      act.slot_values = pick_entries(history_entries(history, d.name, sys_act.slot_values, any),
                                     rng, options);
      break;
    case UserIntent::pick:
      if (sys_act.slot_values.empty()) throw ConstraintError("nothing offered to pick from");
      act.slot_values = {rng.pick(sys_act.slot_values)};
      break;
    case UserIntent::select:
      act.slot_values = sys_act.slot_values;
      break;
    case UserIntent::nobook: {
      auto candidates = history_entries(history, d.name, sys_act.slot_values, [&](const SlotValue& sv) {
        return std::any_of(booking.begin(), booking.end(),
                           [&](const SlotSpec* s) { return s->name == sv.slot; });
      });
      act.slot_values = pick_entries(candidates, rng, options);
      break;
    }
    case UserIntent::new_domain: {
      const auto used = history.domains();
      std::vector<const DomainSpec*> others;
      for (const auto& od : schema.domains)
        if (od.name != d.name && !used.count(od.name) &&
            !eligible_slots(od, SlotRole::informable).empty())
          others.push_back(&od);
      if (others.empty()) throw ConstraintError("no other domain to switch to");
      const DomainSpec& nd = *rng.pick(others);
      act.domain = nd.name;
      act.slot_values = sample_slot_values(schema, nd.name, 1, SlotRole::informable, rng);
      break;
    }
  }

  std::vector<DialogueAct> acts{std::move(act)};
  const auto [delta, full] = derive_turn_state(history, acts);
  if (!category_holds(category, history, delta))
    throw ConstraintError("user act " + std::string(to_string(user)) + " cannot realize category " +
                          std::string(to_string(category)));
  return acts;
}

std::pair<TurnDelta, DialogueState> derive_turn_state(const DialogueState& history,
                                                      std::span<const DialogueAct> user_acts) {
  TurnDelta delta;
  for (const auto& act : user_acts) {
    const auto user = std::get<UserIntent>(act.intent);
    switch (user) {
      case UserIntent::inform:
      case UserIntent::book:
      case UserIntent::new_domain:
      case UserIntent::pick:
      case UserIntent::select:
      case UserIntent::update:
      case UserIntent::recheck:  // verbatim re-statement: recorded, no net change
        for (const auto& sv : act.slot_values) delta.updates.set(sv);
        break;
      case UserIntent::nobook:
        for (const auto& sv : act.slot_values) delta.deletions.insert({sv.domain, sv.slot});
        break;
      case UserIntent::confirm:
      case UserIntent::reqmore:
      case UserIntent::end: break;
    }
  }
  DialogueState full = apply(history, delta);
  return {std::move(delta), std::move(full)};
}

SynthesisResult synthesize_structure(const Schema& schema, FlowCategory category,
                                     std::string_view domain, std::uint64_t master_seed,
                                     std::uint64_t sample_index, const SynthesisOptions& options) {
  schema.domain(domain);
  if (options.forced_pair && !is_compatible(category, *options.forced_pair))
    throw std::invalid_argument("forced intent pair is not compatible with category " +
                                std::string(to_string(category)));
  for (unsigned attempt = 0; attempt < options.max_attempts; ++attempt) {
    Rng rng(derive_seed(master_seed, sample_index, attempt, Stream::structure));
    const IntentPair pair = options.forced_pair ? *options.forced_pair
                                                : sample_intent_pair(category, rng);
    DialogueStructure s;
    s.flow_category = category;
    s.domain = std::string(domain);
    try {
      s.history = synthesize_history(schema, pair.system, category, domain, rng);
      s.system_acts = sample_system_act(schema, s.history, pair.system, domain, rng, options);
      s.user_acts = sample_user_act(schema, s.history, s.system_acts, pair.user, category, rng,
                                    options);
    } catch (const ConstraintError&) {
      continue;
    }
    std::tie(s.turn_delta, s.full_state) = derive_turn_state(s.history, s.user_acts);
    if (auto bad = structure_violations(schema, s); !bad.empty())
      throw std::logic_error("synthesized structure violates invariant: " + bad.front());
    return {std::move(s), attempt};
  }
  throw ResampleExhausted("no valid " + std::string(to_string(category)) + " structure for domain '" +
                          std::string(domain) + "' within " + std::to_string(options.max_attempts) +
                          " attempts");
}

DialogueStructure synthesize_structure(const Schema& schema, FlowCategory category,
                                       std::string_view domain, Rng& rng,
                                       const SynthesisOptions& options) {
  return synthesize_structure(schema, category, domain, rng.next(), 0, options).structure;
}

std::vector<std::string> structure_violations(const Schema& schema, const DialogueStructure& s) {
  std::vector<std::string> out;
  if (s.system_acts.empty() || s.user_acts.empty()) {
    out.push_back("missing system or user act");
    return out;
  }
  for (const auto& a : s.system_acts)
    if (!std::holds_alternative<SystemIntent>(a.intent)) out.push_back("system act has user intent");
  for (const auto& a : s.user_acts)
    if (!std::holds_alternative<UserIntent>(a.intent)) out.push_back("user act has system intent");
  if (!out.empty()) return out;

  const IntentPair pair = s.intents();
  if (!is_valid_transition(pair.system, pair.user))
    out.push_back("invalid transition " + std::string(to_string(pair.system)) + " -> " +
                  std::string(to_string(pair.user)));
  if (category_of(pair) != s.flow_category)
    out.push_back("intent pair not compatible with category " +
                  std::string(to_string(s.flow_category)));

  auto check_act = [&](const DialogueAct& a) {
    const std::string name = std::string(to_string(a.side())) + " " + std::string(to_string(a.intent));
    if (a.mode != act_mode(a.intent)) out.push_back(name + ": mode does not match intent");
    if (a.mode == ActMode::bare && !a.slot_values.empty())
      out.push_back(name + ": bare act carries slot-values");
    if (a.mode != ActMode::bare && a.slot_values.empty())
      out.push_back(name + ": act carries no slot-values");
    for (const auto& sv : a.slot_values) {
      if (sv.domain != a.domain) out.push_back(name + ": slot-value outside the act's domain");
      if (!schema.find_slot(sv.domain, sv.slot)) out.push_back(name + ": unknown slot " + sv.key());
      if (a.mode == ActMode::full && !validate_value(schema, sv))
        out.push_back(name + ": invalid value for " + sv.key());
      if (a.mode == ActMode::slot_only && !sv.value.empty())
        out.push_back(name + ": slot_only act carries a value");
    }
  };
  for (const auto& a : s.system_acts) check_act(a);
  for (const auto& a : s.user_acts) check_act(a);

  for (const auto& a : s.user_acts)
    if (std::get<UserIntent>(a.intent) == UserIntent::new_domain &&
        (a.domain == s.domain || s.history.domains().count(a.domain)))
      out.push_back("new_domain act does not introduce a new domain");

  for (const auto* state : {&s.history, &s.full_state, &s.turn_delta.updates})
    for (const auto& sv : state->slot_values())
      if (!validate_value(schema, sv)) out.push_back("state entry fails validation: " + sv.key());

  if (apply(s.history, s.turn_delta) != s.full_state)
    out.push_back("full_state != apply(history, turn_delta)");
  for (const auto& k : s.turn_delta.deletions)
    if (s.full_state.contains(k)) out.push_back("deleted key survives: " + k.str());
  if (!category_holds(s.flow_category, s.history, s.turn_delta))
    out.push_back("turn state does not realize category " + std::string(to_string(s.flow_category)));
  if (s.flow_category == FlowCategory::no_new_state && !s.turn_delta.deletions.empty())
    out.push_back("no_new_state turn deletes slots");
  return out;
}

}  // namespace dialsynth
