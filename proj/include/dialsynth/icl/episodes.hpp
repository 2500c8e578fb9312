#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dialsynth/corpus.hpp"
#include "dialsynth/schema.hpp"
#include "dialsynth/structure.hpp"

namespace dialsynth::icl {

struct EvalTurn {
  std::size_t turn_index = 0;
  std::set<std::string> domains;
  std::string system_utterance;
  std::string user_utterance;
  TurnDelta gold_turn_state;
  DialogueState gold_full_state;

  friend bool operator==(const EvalTurn&, const EvalTurn&) = default;
};

struct EvalEpisode {
  std::string episode_id;
  /// Gold state before the first turn; empty for dialogues read from the start.
  DialogueState initial_state;
  std::vector<EvalTurn> turns;

  friend bool operator==(const EvalEpisode&, const EvalEpisode&) = default;
};

/// Gold full states must accumulate the gold turn states, starting from the
/// initial state. Throws ValidationError naming the episode and turn.
void validate_episode(const EvalEpisode& episode);

/// One JSON record per turn:
///   {episode_id, turn_index, domains, system_utterance, user_utterance,
///    gold_turn_state, gold_full_state}
/// plus an optional "initial_state" on turn 0. Turn states use "[DELETE]"
/// for removed slots.
std::string write_episodes(const std::vector<EvalEpisode>& episodes);
/// Throws ParseError naming the line.
std::vector<EvalEpisode> read_episodes(std::string_view text);
std::vector<EvalEpisode> read_episodes_file(const std::filesystem::path& path);

/// One single-turn episode per corpus sample, its history as initial state.
std::vector<EvalEpisode> episodes_from_corpus(const Corpus& corpus);

/// Maps a MultiWOZ-style data.json document ({dialogue_id: {"log": [...]}})
/// onto episodes, keeping only slots of `schema`. Empty and "not mentioned"
/// values are treated as unset.
std::vector<EvalEpisode> import_multiwoz(std::string_view document, const Schema& schema);
std::vector<EvalEpisode> import_multiwoz_file(const std::filesystem::path& path, const Schema& schema);

}  // namespace dialsynth::icl
