#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dialsynth/icl/episodes.hpp"
#include "dialsynth/icl/normalize.hpp"
#include "dialsynth/icl/retrieval.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/refiner.hpp"
#include "dialsynth/schema.hpp"

namespace dialsynth::icl {

enum class EvalMode { zero_shot, few_shot_random, few_shot_retrieval };

std::string_view to_string(EvalMode mode);
std::optional<EvalMode> parse_eval_mode(std::string_view name);

/// One CREATE TABLE block per domain. Categorical and boolean slots list at
/// most `value_bound` of their values.
std::string build_ontology_description(const Schema& schema, std::size_t value_bound = 5);

/// "domain-slot = value, ..." in key order, or "none".
std::string format_state(const DialogueState& state);
/// Like format_state; deletions carry "[DELETE]".
std::string format_delta(const TurnDelta& delta);

/// Ontology, then one "Example #n" block per exemplar, then the query turn.
/// Throws std::invalid_argument when zero_shot is given exemplars.
std::string build_prompt(std::string_view ontology, const std::vector<const Exemplar*>& exemplars,
                         const DialogueState& running_state, std::string_view system_utterance,
                         std::string_view user_utterance, EvalMode mode);

struct ParsedChange {
  TurnDelta delta;
  bool failed = false;
};

/// Reads the first line of `completion` in the answer grammar
/// `domain-slot = value, ...` (or "none"). Keys and values are lowercased,
/// trimmed and whitespace-collapsed; with a schema, "_" in slot names maps
/// to " " when that names a known slot. Unparseable text yields an empty
/// delta with `failed` set.
ParsedChange parse_state_change(std::string_view completion, const Schema* schema = nullptr);

struct EvalConfig {
  EvalMode mode = EvalMode::few_shot_retrieval;
  std::size_t k = 10;
  /// Exemplars per domain for few_shot_random.
  std::size_t random_per_domain = 2;
  std::uint64_t seed = 0;
  std::size_t value_bound = 5;
  unsigned workers = 1;
  GenerationParams params;
  RetryPolicy retry;
  NormalizerConfig normalizer;
  /// TfCosineScorer when null.
  SimilarityScorer* scorer = nullptr;
};

struct TurnResult {
  std::string episode_id;
  std::size_t turn_index = 0;
  std::set<std::string> domains;
  std::string completion;
  TurnDelta predicted_delta;
  DialogueState predicted_state;
  DialogueState gold_state;
  bool correct = false;
  bool parse_failed = false;
  bool backend_failed = false;
  std::vector<std::string> exemplar_ids;
};

struct JgaReport {
  double jga_all = 0;
  std::map<std::string, double> jga_per_domain;
  /// Mean of jga_per_domain.
  double jga_domain_mean = 0;
  std::uint64_t turns = 0;
  std::uint64_t correct = 0;
  std::map<std::string, std::uint64_t> domain_turns;
  std::map<std::string, std::uint64_t> domain_correct;
  std::uint64_t parse_failures = 0;
  std::uint64_t backend_failures = 0;
  std::vector<TurnResult> transcript;
};

/// Predicted states accumulate predicted deltas turn by turn; a turn is
/// correct iff the normalized predicted and gold full states are equal.
/// Per-domain accuracy compares each tagged domain's slots only. Throws
/// std::invalid_argument for no episodes or an empty pool in a few-shot mode.
JgaReport evaluate(const std::vector<EvalEpisode>& episodes, const ExamplePool& pool,
                   const Schema& schema, LlmBackend& backend, const EvalConfig& config = {});

/// Summary (and per-turn transcript when requested) as JSON.
std::string report_json(const JgaReport& report, bool include_transcript = false);

}  // namespace dialsynth::icl
