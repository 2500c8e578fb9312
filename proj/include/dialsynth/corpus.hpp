#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialsynth/dialogue_model.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/refiner.hpp"
#include "dialsynth/schema.hpp"
#include "dialsynth/structure.hpp"
#include "dialsynth/template_engine.hpp"

namespace dialsynth {

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t sample_index = 0;
  /// Structure resampling attempt that succeeded.
  unsigned attempt = 0;
  /// Replacement structures drawn after refinement failures.
  unsigned replacement = 0;
  /// "none" for template-only samples, otherwise the refinement strategy.
  std::string strategy = "none";
  std::vector<DialogueAct> system_acts;
  std::vector<DialogueAct> user_acts;
  std::vector<std::size_t> system_template_ids;
  std::vector<std::size_t> user_template_ids;
  std::optional<RefinedPair> refinement;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// One exchange: history, system turn, user turn and the resulting states.
struct TurnSample {
  std::string id;
  std::string domain;
  FlowCategory flow_category = FlowCategory::new_slot_values;
  DialogueState history;
  std::string system_template;
  std::string user_template;
  std::string system_utterance;
  std::string user_utterance;
  TurnDelta turn_delta;
  DialogueState full_state;
  Provenance provenance;

  IntentPair intents() const;
  friend bool operator==(const TurnSample&, const TurnSample&) = default;
};

enum class CompositionKind { percentage, unique_all };
enum class RefinementMode { none, full };

std::string_view to_string(CompositionKind k);
std::string_view to_string(RefinementMode m);

struct CompositionSpec {
  CompositionKind kind = CompositionKind::percentage;
  std::string name;
  /// Per-domain sample targets (percentage kind), in output order.
  std::vector<std::pair<std::string, std::uint64_t>> targets;
  /// Samples per unique flow (unique_all kind).
  std::uint64_t copies = 1;
  std::uint64_t seed = 0;
  RefinementMode refinement = RefinementMode::none;
  RefinementStrategy strategy = RefinementStrategy::utterance_level;

  std::uint64_t target_total() const;
  friend bool operator==(const CompositionSpec&, const CompositionSpec&) = default;
};

/// Names of the builtin specs ("mw-1pct", ..., "unique_all", "unique_all_5x").
std::vector<std::string> builtin_spec_names();
/// Builtin per-domain split, or nullopt for an unknown name.
std::optional<CompositionSpec> builtin_spec(std::string_view name);
/// A builtin name or the path of a JSON spec document.
CompositionSpec load_spec(std::string_view name_or_path);
CompositionSpec parse_spec(std::string_view document);
std::string write_spec(const CompositionSpec& spec);

struct Manifest {
  CompositionSpec spec;
  std::string tool_version;
  std::string schema_version;
  std::string schema_source = "builtin";
  std::string template_source = "builtin";
  std::string backend = "none";
  std::map<std::string, std::uint64_t> domain_counts;
  std::map<std::string, std::uint64_t> category_counts;
  double grounding_rate = 1.0;
  std::uint64_t failures = 0;
  std::uint64_t sample_count = 0;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct Corpus {
  Manifest manifest;
  std::vector<TurnSample> samples;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Largest-remainder split of `total` over integer percentages summing to
/// 100. Ties go to the larger remainder, then to the lower index.
std::vector<std::uint64_t> apportion(std::uint64_t total, const std::vector<int>& percents);

/// Category counts for `total` samples, indexed like kFlowCategories.
std::array<std::uint64_t, 6> category_counts(std::uint64_t total);

struct ComposeOptions {
  const TemplateBank* bank = nullptr;  ///< builtin bank when null
  LlmBackend* backend = nullptr;       ///< required for RefinementMode::full
  RefinerConfig refiner;
  unsigned workers = 1;
  /// Replacement structures tried after a refinement failure.
  unsigned max_replacements = 3;
  std::string schema_source = "builtin";
  std::string template_source = "builtin";
};

/// Dispatches on spec.kind.
Corpus compose(const Schema& schema, const CompositionSpec& spec, const ComposeOptions& options = {});
Corpus compose_split(const Schema& schema, const CompositionSpec& spec,
                     const ComposeOptions& options = {});
Corpus compose_unique_all(const Schema& schema, const CompositionSpec& spec,
                          const ComposeOptions& options = {});

/// One entry per unique flow: domain, intent pair and act-slot signature.
struct Flow {
  std::string domain;
  IntentPair pair;

  std::string key() const;
  friend bool operator==(const Flow&, const Flow&) = default;
};
std::vector<Flow> enumerate_flows(const Schema& schema);
/// "domain|system|user|signature" for a realized sample.
std::string flow_key(const TurnSample& sample);

/// Refines the utterances of a template-only corpus; structure fields are
/// left untouched. Samples whose refinement fails are dropped and counted.
Corpus refine_corpus(const Corpus& corpus, LlmBackend& backend, const RefinerConfig& config,
                     unsigned workers = 1);

/// True iff every act value of both sides occurs in the sample's utterances.
bool sample_grounded(const TurnSample& sample);

/// Recomputes the manifest tallies from the samples.
void recount(Corpus& corpus);

std::string write_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
/// Throws ParseError naming the offending line ("line N").
Corpus read_corpus(std::string_view text);
Corpus read_corpus_file(const std::filesystem::path& path);

struct CorpusStats {
  std::uint64_t sample_count = 0;
  std::map<std::string, std::uint64_t> per_domain;
  std::map<std::string, std::uint64_t> per_category;
  double grounding_rate = 0.0;
  double mean_system_words = 0.0;
  double mean_user_words = 0.0;
  /// "system->user" intent pair counts.
  std::map<std::string, std::uint64_t> intent_pairs;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string stats_json(const CorpusStats& stats);

/// Average input/output tokens of one call kind.
struct TokenAverage {
  double input = 0;
  double output = 0;
};

/// System modify, user modify, system paraphrase, user paraphrase.
using CallAverages = std::array<TokenAverage, 4>;

struct Prices {
  double input_per_1k = 0.0010;
  double output_per_1k = 0.0020;
};

struct CostReport {
  std::uint64_t sample_count = 0;
  double naive = 0;
  double overhead_factor = 1.0;
  double reported = 0;
};

inline constexpr double kDefaultOverhead = 1.28;

/// naive = count * sum(avg_in * price_in + avg_out * price_out) / 1000;
/// reported = naive * overhead_factor.
CostReport estimate_cost(std::uint64_t sample_count, const CallAverages& averages,
                         const Prices& prices = {}, double overhead_factor = kDefaultOverhead);

/// Published per-call token averages for the builtin splits.
std::optional<CallAverages> builtin_call_averages(std::string_view spec_name);

/// Averages measured from the refinement records of a corpus; nullopt when
/// no sample carries utterance-level records.
std::optional<CallAverages> measured_call_averages(const Corpus& corpus);

}  // namespace dialsynth
