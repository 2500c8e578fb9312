#include "dialsynth/icl/evaluator.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dialsynth/errors.hpp"
#include "dialsynth/rng.hpp"
#include "json_util.hpp"
#include "parallel.hpp"

namespace dialsynth::icl {

using jsonutil::ordered_json;

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::zero_shot: return "zero_shot";
    case EvalMode::few_shot_random: return "few_shot_random";
    case EvalMode::few_shot_retrieval: return "few_shot_retrieval";
  }
  return "?";
}

std::optional<EvalMode> parse_eval_mode(std::string_view name) {
  for (auto m : {EvalMode::zero_shot, EvalMode::few_shot_random, EvalMode::few_shot_retrieval})
    if (to_string(m) == name) return m;
  return std::nullopt;
}

std::string build_ontology_description(const Schema& schema, std::size_t value_bound) {
  std::string out;
  for (const auto& d : schema.domains) {
    out += "CREATE TABLE " + d.name + "(\n";
    for (const auto& s : d.slots) {
      if (!s.informable) continue;
      out += "  \"" + s.name + "\" TEXT,";
      if ((s.kind == SlotKind::categorical || s.kind == SlotKind::boolean) && value_bound > 0) {
        out += " -- values:";
        const std::size_t n = std::min(value_bound, s.values.size());
        for (std::size_t i = 0; i < n; ++i) out += (i ? ", '" : " '") + s.values[i] + "'";
        if (n < s.values.size()) out += ", ...";
      } else if (s.kind == SlotKind::time) {
        out += " -- HH:MM";
      }
      out += "\n";
    }
    out += ");\n";
  }
  return out;
}

std::string format_state(const DialogueState& state) {
  if (state.empty()) return "none";
  std::string out;
  for (const auto& [k, v] : state) {
    if (!out.empty()) out += ", ";
    out += k.str() + " = " + v;
  }
  return out;
}

std::string format_delta(const TurnDelta& delta) {
  std::map<std::string, std::string> merged;
  for (const auto& [k, v] : delta.updates) merged[k.str()] = v;
  for (const auto& k : delta.deletions) merged[k.str()] = std::string(kDeleteSentinel);
  if (merged.empty()) return "none";
  std::string out;
  for (const auto& [k, v] : merged) {
    if (!out.empty()) out += ", ";
    out += k + " = " + v;
  }
  return out;
}

namespace {

const char* kInstruction =
    "-- Using the tables above, track the dialogue state. Answer with the slots the user changes in "
    "the last turn as comma-separated \"domain-slot = value\" pairs, \"[DELETE]\" as the value of a "
    "removed slot, or \"none\".\n";

std::string turn_block(const DialogueState& context, std::string_view system_utterance,
                       std::string_view user_utterance) {
  return "[context] " + format_state(context) + "\n[system] " + std::string(system_utterance) +
         "\nQ: [user] " + std::string(user_utterance) + "\n";
}

}  // namespace

std::string build_prompt(std::string_view ontology, const std::vector<const Exemplar*>& exemplars,
                         const DialogueState& running_state, std::string_view system_utterance,
                         std::string_view user_utterance, EvalMode mode) {
  if (mode == EvalMode::zero_shot && !exemplars.empty())
    throw std::invalid_argument("zero_shot prompts take no exemplars");
  std::string out(ontology);
  out += kInstruction;
  out += "\n";
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const Exemplar& e = *exemplars[i];
    out += "Example #" + std::to_string(i + 1) + "\n";
    out += turn_block(e.context, e.system_utterance, e.user_utterance);
    out += "A: " + format_delta(e.gold_delta) + "\n\n";
  }
  out += turn_block(running_state, system_utterance, user_utterance);
  out += "A:";
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<SlotKey> parse_key(const std::string& raw, const Schema* schema) {
  const std::string key = basic_normalize(raw);
  const auto dash = key.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == key.size()) return std::nullopt;
  SlotKey k{trim(key.substr(0, dash)), trim(key.substr(dash + 1))};
  if (k.domain.empty() || k.slot.empty()) return std::nullopt;
  if (k.domain.find(' ') != std::string::npos) return std::nullopt;
  if (schema && !schema->find_slot(k.domain, k.slot)) {
    std::string spaced = k.slot;
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    if (schema->find_slot(k.domain, spaced)) k.slot = spaced;
  }
  return k;
}

std::optional<TurnDelta> parse_line(std::string line, const Schema* schema) {
  line = trim(line);
  if (line.rfind("A:", 0) == 0) line = trim(line.substr(2));
  if (line.empty()) return std::nullopt;
  if (basic_normalize(line) == "none") return TurnDelta{};
  TurnDelta delta;
  std::stringstream parts(line);
  for (std::string part; std::getline(parts, part, ',');) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) return std::nullopt;
    auto key = parse_key(part.substr(0, eq), schema);
    if (!key) return std::nullopt;
    const std::string value = basic_normalize(part.substr(eq + 1));
    if (value.empty()) return std::nullopt;
    if (value == basic_normalize(kDeleteSentinel)) {
      delta.updates.erase(*key);
      delta.deletions.insert(*key);
    } else {
      delta.deletions.erase(*key);
      delta.updates.set(*key, value);
    }
  }
  return delta;
}

}  // namespace

ParsedChange parse_state_change(std::string_view completion, const Schema* schema) {
  std::istringstream lines{std::string(completion)};
  for (std::string line; std::getline(lines, line);) {
    if (auto delta = parse_line(line, schema)) return {std::move(*delta), false};
  }
  return {{}, true};
}

namespace {

std::vector<const Exemplar*> random_exemplars(const ExamplePool& pool, const Schema& schema,
                                              const EvalConfig& config) {
  Rng rng(derive_seed(config.seed, 0, 0, Stream::retrieval));
  std::vector<std::size_t> chosen;
  for (const auto& d : schema.domains) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pool[i].domains.count(d.name) &&
          std::find(chosen.begin(), chosen.end(), i) == chosen.end())
        candidates.push_back(i);
    const std::size_t n = std::min(config.random_per_domain, candidates.size());
    for (std::size_t idx : rng.choose(candidates.size(), n)) chosen.push_back(candidates[idx]);
  }
  std::vector<const Exemplar*> out;
  for (std::size_t i : chosen) out.push_back(&pool[i]);
  return out;
}

std::optional<std::string> complete_with_retry(LlmBackend& backend, const std::string& prompt,
                                               const EvalConfig& config) {
  const unsigned limit = std::max(1u, config.retry.max_attempts);
  for (unsigned attempt = 0; attempt < limit; ++attempt) {
    if (attempt > 0) {
      const auto delay = config.retry.base_backoff * (1LL << (attempt - 1));
      if (config.retry.sleep)
        config.retry.sleep(delay);
      else
        std::this_thread::sleep_for(delay);
    }
    try {
      return backend.complete(prompt, config.params).text;
    } catch (const BackendError&) {
    }
  }
  return std::nullopt;
}

}  // namespace

JgaReport evaluate(const std::vector<EvalEpisode>& episodes, const ExamplePool& pool,
                   const Schema& schema, LlmBackend& backend, const EvalConfig& config) {
  if (episodes.empty()) throw std::invalid_argument("no episodes to evaluate");
  if (config.mode != EvalMode::zero_shot && pool.empty())
    throw std::invalid_argument("few-shot evaluation needs a non-empty example pool");
  const std::string ontology = build_ontology_description(schema, config.value_bound);
  const ValueNormalizer normalize(config.normalizer);
  TfCosineScorer default_scorer;
  SimilarityScorer& scorer = config.scorer ? *config.scorer : default_scorer;
  const std::vector<const Exemplar*> fixed =
      config.mode == EvalMode::few_shot_random ? random_exemplars(pool, schema, config)
                                               : std::vector<const Exemplar*>{};

  std::vector<std::vector<TurnResult>> per_episode(episodes.size());
  detail::parallel_for(episodes.size(), config.workers, [&](std::size_t ei) {
    const EvalEpisode& ep = episodes[ei];
    DialogueState running = ep.initial_state;
    for (const auto& turn : ep.turns) {
      TurnResult r;
      r.episode_id = ep.episode_id;
      r.turn_index = turn.turn_index;
      r.domains = turn.domains;
      std::vector<const Exemplar*> exemplars = fixed;
      if (config.mode == EvalMode::few_shot_retrieval) {
        const std::string query = representation(running, turn.system_utterance, turn.user_utterance);
        for (std::size_t i : retrieve_examples(pool, query, config.k, scorer)) exemplars.push_back(&pool[i]);
      }
      for (const auto* e : exemplars) r.exemplar_ids.push_back(e->id);
      const std::string prompt =
          build_prompt(ontology, exemplars, running, turn.system_utterance, turn.user_utterance, config.mode);
      if (auto text = complete_with_retry(backend, prompt, config)) {
        r.completion = *text;
        ParsedChange parsed = parse_state_change(*text, &schema);
        r.parse_failed = parsed.failed;
        r.predicted_delta = std::move(parsed.delta);
      } else {
        r.backend_failed = true;
      }
      running = apply(running, r.predicted_delta);
      r.predicted_state = running;
      r.gold_state = turn.gold_full_state;
      r.correct = !r.backend_failed && normalize.state(running) == normalize.state(turn.gold_full_state);
      per_episode[ei].push_back(std::move(r));
    }
  });

  JgaReport report;
  for (auto& results : per_episode)
    for (auto& r : results) {
      ++report.turns;
      if (r.correct) ++report.correct;
      if (r.parse_failed) ++report.parse_failures;
      if (r.backend_failed) ++report.backend_failures;
      const DialogueState pred = normalize.state(r.predicted_state);
      const DialogueState gold = normalize.state(r.gold_state);
      for (const auto& d : r.domains) {
        ++report.domain_turns[d];
        auto& c = report.domain_correct[d];
        if (!r.backend_failed && pred.restricted_to(d) == gold.restricted_to(d)) ++c;
      }
      report.transcript.push_back(std::move(r));
    }
  report.jga_all = report.turns ? static_cast<double>(report.correct) / static_cast<double>(report.turns) : 0.0;
  double sum = 0;
  for (const auto& [d, n] : report.domain_turns) {
    const double jga = static_cast<double>(report.domain_correct[d]) / static_cast<double>(n);
    report.jga_per_domain[d] = jga;
    sum += jga;
  }
  report.jga_domain_mean =
      report.jga_per_domain.empty() ? 0.0 : sum / static_cast<double>(report.jga_per_domain.size());
  return report;
}

std::string report_json(const JgaReport& r, bool include_transcript) {
  ordered_json j;
  j["jga_all"] = r.jga_all;
  j["jga_per_domain"] = r.jga_per_domain;
  j["jga_domain_mean"] = r.jga_domain_mean;
  j["turns"] = r.turns;
  j["correct"] = r.correct;
  j["domain_turns"] = r.domain_turns;
  j["parse_failures"] = r.parse_failures;
  j["backend_failures"] = r.backend_failures;
  if (include_transcript) {
    j["transcript"] = ordered_json::array();
    for (const auto& t : r.transcript) {
      ordered_json tj;
      tj["episode_id"] = t.episode_id;
      tj["turn_index"] = t.turn_index;
      tj["domains"] = t.domains;
      tj["exemplars"] = t.exemplar_ids;
      tj["completion"] = t.completion;
      tj["predicted_delta"] = format_delta(t.predicted_delta);
      tj["predicted_state"] = format_state(t.predicted_state);
      tj["gold_state"] = format_state(t.gold_state);
      tj["correct"] = t.correct;
      tj["parse_failed"] = t.parse_failed;
      tj["backend_failed"] = t.backend_failed;
      j["transcript"].push_back(std::move(tj));
    }
  }
  return j.dump(2) + "\n";
}

}  // namespace dialsynth::icl
