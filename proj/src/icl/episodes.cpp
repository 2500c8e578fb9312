#include "dialsynth/icl/episodes.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "dialsynth/errors.hpp"
#include "dialsynth/icl/normalize.hpp"
#include "json_util.hpp"

namespace dialsynth::icl {

using jsonutil::json;
using jsonutil::ordered_json;

void validate_episode(const EvalEpisode& e) {
  DialogueState state = e.initial_state;
  for (std::size_t t = 0; t < e.turns.size(); ++t) {
    const EvalTurn& turn = e.turns[t];
    const std::string where = e.episode_id + " turn " + std::to_string(t);
    if (turn.turn_index != t) throw ValidationError(where, "turn indices must run 0, 1, 2, ...");
    state = apply(state, turn.gold_turn_state);
    if (state != turn.gold_full_state)
      throw ValidationError(where, "gold_full_state is not the accumulation of gold turn states");
  }
}

namespace {

ordered_json state_json(const DialogueState& s) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : s) j[k.str()] = v;
  return j;
}

ordered_json delta_json(const TurnDelta& d) {
  std::map<std::string, std::string> merged;
  for (const auto& [k, v] : d.updates) merged[k.str()] = v;
  for (const auto& k : d.deletions) merged[k.str()] = std::string(kDeleteSentinel);
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : merged) j[k] = v;
  return j;
}

DialogueState read_state(const json& j, const std::string& path) {
  jsonutil::require_object(j, path);
  DialogueState s;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ParseError(path + "." + k, "expected a string value");
    try {
      s.set(SlotKey::parse(k), v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(path + "." + k, e.what());
    }
  }
  return s;
}

TurnDelta read_delta(const json& j, const std::string& path) {
  TurnDelta d;
  for (const auto& [k, v] : read_state(j, path)) {
    if (v == kDeleteSentinel)
      d.deletions.insert(k);
    else
      d.updates.set(k, v);
  }
  return d;
}

}  // namespace

std::string write_episodes(const std::vector<EvalEpisode>& episodes) {
  std::string out;
  for (const auto& e : episodes)
    for (const auto& t : e.turns) {
      ordered_json j;
      j["episode_id"] = e.episode_id;
      j["turn_index"] = t.turn_index;
      j["domains"] = t.domains;
      j["system_utterance"] = t.system_utterance;
      j["user_utterance"] = t.user_utterance;
      j["gold_turn_state"] = delta_json(t.gold_turn_state);
      j["gold_full_state"] = state_json(t.gold_full_state);
      if (t.turn_index == 0 && !e.initial_state.empty()) j["initial_state"] = state_json(e.initial_state);
      out += j.dump() + "\n";
    }
  return out;
}

std::vector<EvalEpisode> read_episodes(std::string_view text) {
  std::vector<EvalEpisode> episodes;
  std::map<std::string, std::size_t> index;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string label = "line " + std::to_string(line_no);
    try {
      const json j = jsonutil::parse(line, "$");
      jsonutil::require_object(j, "$");
      jsonutil::reject_unknown(j, "$", {"episode_id", "turn_index", "domains", "system_utterance",
                                        "user_utterance", "gold_turn_state", "gold_full_state",
                                        "initial_state"});
      const std::string id = jsonutil::get_string(j, "$", "episode_id");
      EvalTurn t;
      t.turn_index = jsonutil::get_uint(j, "$", "turn_index");
      for (const auto& d : jsonutil::get_array(j, "$", "domains")) {
        if (!d.is_string()) throw ParseError("$.domains", "expected strings");
        t.domains.insert(d.get<std::string>());
      }
      t.system_utterance = jsonutil::get_string(j, "$", "system_utterance");
      t.user_utterance = jsonutil::get_string(j, "$", "user_utterance");
      t.gold_turn_state = read_delta(jsonutil::field(j, "$", "gold_turn_state"), "$.gold_turn_state");
      t.gold_full_state = read_state(jsonutil::field(j, "$", "gold_full_state"), "$.gold_full_state");
      auto [it, fresh] = index.emplace(id, episodes.size());
      if (fresh) episodes.push_back({id, {}, {}});
      EvalEpisode& e = episodes[it->second];
      if (t.turn_index != e.turns.size())
        throw ParseError("$.turn_index", "expected turn " + std::to_string(e.turns.size()) + " of " + id);
      if (j.contains("initial_state")) {
        if (t.turn_index != 0) throw ParseError("$.initial_state", "only allowed on turn 0");
        e.initial_state = read_state(j["initial_state"], "$.initial_state");
      }
      e.turns.push_back(std::move(t));
      validate_episode(e);
    } catch (const ParseError& e) {
      throw ParseError(label, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(label, e.what());
    }
  }
  return episodes;
}

std::vector<EvalEpisode> read_episodes_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read episodes " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return read_episodes(buf.str());
}

std::vector<EvalEpisode> episodes_from_corpus(const Corpus& corpus) {
  std::vector<EvalEpisode> out;
  for (const auto& s : corpus.samples) {
    EvalEpisode e;
    e.episode_id = s.id;
    e.initial_state = s.history;
    EvalTurn t;
    t.domains = s.full_state.domains();
    t.domains.insert(s.domain);
    t.system_utterance = s.system_utterance;
    t.user_utterance = s.user_utterance;
    t.gold_turn_state = s.turn_delta;
    t.gold_full_state = s.full_state;
    e.turns.push_back(std::move(t));
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

bool unset_value(const std::string& v) {
  return v.empty() || v == "not mentioned" || v == "none" || v == "not given";
}

// Lowercased slot name as the schema spells it ("leaveAt" -> "leaveat").
std::string canonical_slot(const DomainSpec& d, std::string name, bool booking) {
  name = basic_normalize(name);
  if (booking) name = "book " + name;
  if (d.find(name)) return name;
  std::string spaced = name;
  for (char& c : spaced)
    if (c == '_') c = ' ';
  if (d.find(spaced)) return spaced;
  return {};
}

DialogueState state_from_metadata(const json& metadata, const Schema& schema) {
  DialogueState s;
  if (!metadata.is_object()) return s;
  for (const auto& d : schema.domains) {
    auto it = metadata.find(d.name);
    if (it == metadata.end() || !it->is_object()) continue;
    for (const char* section : {"semi", "book"}) {
      auto sec = it->find(section);
      if (sec == it->end() || !sec->is_object()) continue;
      for (const auto& [slot, value] : sec->items()) {
        if (!value.is_string()) continue;
        const std::string v = basic_normalize(value.get<std::string>());
        if (unset_value(v)) continue;
        const std::string name = canonical_slot(d, slot, std::string(section) == "book");
        if (!name.empty()) s.set({d.name, name}, v);
      }
    }
  }
  return s;
}

}  // namespace

std::vector<EvalEpisode> import_multiwoz(std::string_view document, const Schema& schema) {
  const json root = jsonutil::parse(document, "$");
  jsonutil::require_object(root, "$");
  std::vector<EvalEpisode> out;
  for (const auto& [id, dialogue] : root.items()) {
    const std::string path = "$." + id;
    jsonutil::require_object(dialogue, path);
    const json& log = jsonutil::get_array(dialogue, path, "log");
    EvalEpisode e;
    e.episode_id = id;
    DialogueState previous;
    std::string system_text;
    std::set<std::string> active;
    for (std::size_t i = 0; i + 1 < log.size(); i += 2) {
      const std::string lp = path + ".log[" + std::to_string(i) + "]";
      jsonutil::require_object(log[i], lp);
      EvalTurn t;
      t.turn_index = e.turns.size();
      t.system_utterance = system_text;
      t.user_utterance = jsonutil::get_string(log[i], lp, "text");
      const json& sys = log[i + 1];
      jsonutil::require_object(sys, path + ".log[" + std::to_string(i + 1) + "]");
      const DialogueState full = state_from_metadata(sys.value("metadata", json::object()), schema);
      for (const auto& [k, v] : full) {
        const std::string* old = previous.find(k);
        if (!old || *old != v) t.gold_turn_state.updates.set(k, v);
      }
      for (const auto& [k, _] : previous)
        if (!full.contains(k)) t.gold_turn_state.deletions.insert(k);
      t.gold_full_state = full;
      for (const auto& d : full.domains()) active.insert(d);
      system_text = sys.value("text", std::string());
      previous = full;
      e.turns.push_back(std::move(t));
    }
    for (auto& t : e.turns) t.domains = active;
    if (!e.turns.empty()) out.push_back(std::move(e));
  }
  return out;
}

std::vector<EvalEpisode> import_multiwoz_file(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dialogue file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return import_multiwoz(buf.str(), schema);
}

}  // namespace dialsynth::icl
