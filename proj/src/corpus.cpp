#include "dialsynth/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dialsynth/errors.hpp"
#include "json_util.hpp"
#include "parallel.hpp"

namespace dialsynth {

using jsonutil::json;
using jsonutil::ordered_json;

IntentPair TurnSample::intents() const {
  return {std::get<SystemIntent>(provenance.system_acts.front().intent),
          std::get<UserIntent>(provenance.user_acts.front().intent)};
}

std::string_view to_string(CompositionKind k) {
  return k == CompositionKind::percentage ? "percentage" : "unique_all";
}

std::string_view to_string(RefinementMode m) { return m == RefinementMode::none ? "none" : "full"; }

std::uint64_t CompositionSpec::target_total() const {
  std::uint64_t n = 0;
  for (const auto& [_, count] : targets) n += count;
  return n;
}

// ---------------------------------------------------------------- specs

namespace {

CompositionSpec split_spec(std::string name,
                           std::vector<std::pair<std::string, std::uint64_t>> targets) {
  CompositionSpec s;
  s.kind = CompositionKind::percentage;
  s.name = std::move(name);
  s.targets = std::move(targets);
  s.refinement = RefinementMode::full;
  return s;
}

CompositionSpec unique_spec(std::string name, std::uint64_t copies) {
  CompositionSpec s;
  s.kind = CompositionKind::unique_all;
  s.name = std::move(name);
  s.copies = copies;
  s.refinement = RefinementMode::full;
  return s;
}

const std::vector<CompositionSpec>& builtin_specs() {
  static const std::vector<CompositionSpec> specs = {
      split_spec("mw-1pct", {{"attraction", 106}, {"hotel", 111}, {"restaurant", 116},
                             {"taxi", 105}, {"train", 111}}),
      split_spec("mw-5pct", {{"attraction", 547}, {"hotel", 553}, {"restaurant", 553},
                             {"taxi", 548}, {"train", 547}}),
      split_spec("mw-10pct", {{"attraction", 1093}, {"hotel", 1112}, {"restaurant", 1109},
                              {"taxi", 1086}, {"train", 1095}}),
      unique_spec("unique_all", 1),
      unique_spec("unique_all_5x", 5),
  };
  return specs;
}

ordered_json spec_to_json(const CompositionSpec& s) {
  ordered_json j;
  j["kind"] = std::string(to_string(s.kind));
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["refinement"] = std::string(to_string(s.refinement));
  j["strategy"] = std::string(to_string(s.strategy));
  if (s.kind == CompositionKind::percentage) {
    j["targets"] = ordered_json::array();
    for (const auto& [domain, count] : s.targets)
      j["targets"].push_back(ordered_json{{"domain", domain}, {"count", count}});
  } else {
    j["copies"] = s.copies;
  }
  return j;
}

CompositionSpec spec_from_json(const json& j, const std::string& path) {
  jsonutil::require_object(j, path);
  jsonutil::reject_unknown(j, path, {"kind", "name", "seed", "refinement", "strategy", "targets", "copies"});
  CompositionSpec s;
  const std::string kind = jsonutil::get_string(j, path, "kind");
  if (kind == "percentage")
    s.kind = CompositionKind::percentage;
  else if (kind == "unique_all")
    s.kind = CompositionKind::unique_all;
  else
    throw ParseError(path + ".kind", "expected 'percentage' or 'unique_all'");
  s.name = j.contains("name") ? jsonutil::get_string(j, path, "name") : std::string("custom");
  if (j.contains("seed")) s.seed = jsonutil::get_uint(j, path, "seed");
  if (j.contains("refinement")) {
    const std::string r = jsonutil::get_string(j, path, "refinement");
    if (r == "none")
      s.refinement = RefinementMode::none;
    else if (r == "full")
      s.refinement = RefinementMode::full;
    else
      throw ParseError(path + ".refinement", "expected 'none' or 'full'");
  } else {
    s.refinement = RefinementMode::full;
  }
  if (j.contains("strategy")) {
    const std::string name = jsonutil::get_string(j, path, "strategy");
    auto strategy = parse_refinement_strategy(name);
    if (!strategy) throw ParseError(path + ".strategy", "unknown strategy '" + name + "'");
    s.strategy = *strategy;
  }
  if (s.kind == CompositionKind::percentage) {
    const json& targets = jsonutil::get_array(j, path, "targets");
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const std::string tp = path + ".targets[" + std::to_string(i) + "]";
      jsonutil::require_object(targets[i], tp);
      jsonutil::reject_unknown(targets[i], tp, {"domain", "count"});
      s.targets.emplace_back(jsonutil::get_string(targets[i], tp, "domain"),
                             jsonutil::get_uint(targets[i], tp, "count"));
    }
  } else {
    s.copies = j.contains("copies") ? jsonutil::get_uint(j, path, "copies") : 1;
    if (s.copies == 0) throw ValidationError(path + ".copies", "copies must be positive");
  }
  return s;
}

}  // namespace

std::vector<std::string> builtin_spec_names() {
  std::vector<std::string> out;
  for (const auto& s : builtin_specs()) out.push_back(s.name);
  return out;
}

std::optional<CompositionSpec> builtin_spec(std::string_view name) {
  for (const auto& s : builtin_specs())
    if (s.name == name) return s;
  return std::nullopt;
}

CompositionSpec parse_spec(std::string_view document) {
  return spec_from_json(jsonutil::parse(document, "$"), "$");
}

CompositionSpec load_spec(std::string_view name_or_path) {
  if (auto s = builtin_spec(name_or_path)) return *s;
  std::ifstream in{std::string(name_or_path)};
  if (!in) throw std::runtime_error("unknown spec '" + std::string(name_or_path) + "' (not a builtin name or readable file)");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::string write_spec(const CompositionSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

// ---------------------------------------------------------- apportionment

std::vector<std::uint64_t> apportion(std::uint64_t total, const std::vector<int>& percents) {
  int sum = 0;
  for (int p : percents) {
    if (p < 0) throw std::invalid_argument("negative percentage");
    sum += p;
  }
  if (sum != 100) throw std::invalid_argument("percentages must sum to 100");
  std::vector<std::uint64_t> out(percents.size());
  std::vector<std::uint64_t> remainder(percents.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < percents.size(); ++i) {
    const std::uint64_t scaled = total * static_cast<std::uint64_t>(percents[i]);
    out[i] = scaled / 100;
    remainder[i] = scaled % 100;
    assigned += out[i];
  }
  std::vector<std::size_t> order(percents.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k]];
  return out;
}

std::array<std::uint64_t, 6> category_counts(std::uint64_t total) {
  std::vector<int> percents;
  for (auto c : kFlowCategories) percents.push_back(category_percent(c));
  const auto counts = apportion(total, percents);
  std::array<std::uint64_t, 6> out{};
  std::copy(counts.begin(), counts.end(), out.begin());
  return out;
}

// ------------------------------------------------------------- composing

std::string Flow::key() const {
  auto sig = [](ActMode m) { return std::string(to_string(m)) + (m == ActMode::bare ? "0" : "1"); };
  return domain + "|" + std::string(to_string(pair.system)) + "|" + std::string(to_string(pair.user)) +
         "|" + sig(act_mode(pair.system)) + "/" + sig(act_mode(pair.user));
}

std::vector<Flow> enumerate_flows(const Schema& schema) {
  std::vector<Flow> out;
  const auto pairs = enumerate_pairs();
  for (const auto& d : schema.domains)
    for (const auto& p : pairs) {
      if (p.user == UserIntent::new_domain && schema.domains.size() < 2) continue;
      out.push_back({d.name, p});
    }
  return out;
}

std::string flow_key(const TurnSample& sample) {
  auto sig = [](const std::vector<DialogueAct>& acts) {
    std::string out;
    for (const auto& a : acts) {
      if (!out.empty()) out += "+";
      out += std::string(to_string(a.mode)) + std::to_string(a.slot_values.size());
    }
    return out;
  };
  const auto pair = sample.intents();
  return sample.domain + "|" + std::string(to_string(pair.system)) + "|" +
         std::string(to_string(pair.user)) + "|" + sig(sample.provenance.system_acts) + "/" +
         sig(sample.provenance.user_acts);
}

bool sample_grounded(const TurnSample& s) {
  for (const auto& a : s.provenance.system_acts)
    if (!verify_grounding(a, s.system_utterance)) return false;
  for (const auto& a : s.provenance.user_acts)
    if (!verify_grounding(a, s.user_utterance)) return false;
  return true;
}

void recount(Corpus& corpus) {
  Manifest& m = corpus.manifest;
  m.domain_counts.clear();
  m.category_counts.clear();
  for (auto c : kFlowCategories) m.category_counts[std::string(to_string(c))] = 0;
  std::uint64_t grounded = 0;
  for (const auto& s : corpus.samples) {
    ++m.domain_counts[s.domain];
    ++m.category_counts[std::string(to_string(s.flow_category))];
    if (sample_grounded(s)) ++grounded;
  }
  m.sample_count = corpus.samples.size();
  m.grounding_rate = corpus.samples.empty() ? 0.0
                                            : static_cast<double>(grounded) /
                                                  static_cast<double>(corpus.samples.size());
}

namespace {

struct Job {
  std::string domain;
  FlowCategory category;
  std::optional<IntentPair> pair;
};

std::uint64_t master_seed(std::uint64_t seed, std::uint64_t index, unsigned replacement) {
  return replacement == 0 ? seed : derive_seed(seed, index, replacement, Stream::refinement);
}

std::string sample_id(const std::string& name, std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(index));
  return (name.empty() ? std::string("sample") : name) + "-" + buf;
}

std::pair<std::string, std::vector<std::size_t>> realize_side(const TemplateBank& bank,
                                                             const std::vector<DialogueAct>& acts,
                                                             Rng& rng) {
  std::string text;
  std::vector<std::size_t> ids;
  for (const auto& act : acts) {
    Realization r = realize_act(bank, act, rng);
    if (!text.empty()) text += " ";
    text += r.text;
    ids.push_back(r.template_id);
  }
  return {std::move(text), std::move(ids)};
}

void apply_refinement(TurnSample& s, LlmBackend& backend, const RefinerConfig& config) {
  const Provenance& p = s.provenance;
  Rng rng(derive_seed(master_seed(p.seed, p.sample_index, p.replacement), p.sample_index, p.attempt,
                      Stream::refinement));
  RefinedPair refined =
      refine_sample({s.domain, s.system_template, s.user_template}, backend, rng, config);
  s.system_utterance = refined.system.paraphrased_text;
  s.user_utterance = refined.user.paraphrased_text;
  s.provenance.strategy = std::string(to_string(config.strategy));
  s.provenance.refinement = std::move(refined);
}

struct Outcome {
  std::optional<TurnSample> sample;
  std::uint64_t failures = 0;
};

Outcome build_sample(const Schema& schema, const CompositionSpec& spec, const ComposeOptions& options,
                     const TemplateBank& bank, const Job& job, std::uint64_t index) {
  Outcome out;
  SynthesisOptions so;
  if (job.pair) {
    so.forced_pair = job.pair;
    so.single_slot = true;
  }
  const bool refine = spec.refinement == RefinementMode::full;
  const unsigned replacements = refine ? options.max_replacements : 0;
  for (unsigned rep = 0; rep <= replacements; ++rep) {
    SynthesisResult res;
    try {
      res = synthesize_structure(schema, job.category, job.domain,
                                 master_seed(spec.seed, index, rep), index, so);
    } catch (const ResampleExhausted&) {
      ++out.failures;
      return out;
    }
    DialogueStructure& st = res.structure;
    TurnSample s;
    s.id = sample_id(spec.name, index);
    s.domain = st.domain;
    s.flow_category = st.flow_category;
    s.history = std::move(st.history);
    s.turn_delta = std::move(st.turn_delta);
    s.full_state = std::move(st.full_state);
    s.provenance.seed = spec.seed;
    s.provenance.sample_index = index;
    s.provenance.attempt = res.attempt;
    s.provenance.replacement = rep;
    s.provenance.system_acts = std::move(st.system_acts);
    s.provenance.user_acts = std::move(st.user_acts);
    Rng trng(derive_seed(master_seed(spec.seed, index, rep), index, res.attempt, Stream::templates));
    std::tie(s.system_template, s.provenance.system_template_ids) =
        realize_side(bank, s.provenance.system_acts, trng);
    std::tie(s.user_template, s.provenance.user_template_ids) =
        realize_side(bank, s.provenance.user_acts, trng);
    s.system_utterance = s.system_template;
    s.user_utterance = s.user_template;
    if (refine) {
      try {
        apply_refinement(s, *options.backend, options.refiner);
      } catch (const RefinementFailed&) {
        ++out.failures;
        continue;
      }
    }
    out.sample = std::move(s);
    return out;
  }
  return out;
}

Corpus run_jobs(const Schema& schema, const CompositionSpec& spec, const ComposeOptions& options,
                const std::vector<Job>& jobs) {
  if (spec.refinement == RefinementMode::full && !options.backend)
    throw std::invalid_argument("refinement 'full' needs an LLM backend");
  const TemplateBank& bank = options.bank ? *options.bank : builtin_template_bank();
  std::vector<Outcome> outcomes(jobs.size());
  detail::parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    outcomes[i] = build_sample(schema, spec, options, bank, jobs[i], i);
  });
  Corpus corpus;
  Manifest& m = corpus.manifest;
  m.spec = spec;
  m.tool_version = DIALSYNTH_VERSION;
  m.schema_version = schema.version;
  m.schema_source = options.schema_source;
  m.template_source = options.template_source;
  m.backend = spec.refinement == RefinementMode::full ? options.backend->describe() : "none";
  m.spec.strategy = options.refiner.strategy;
  for (auto& o : outcomes) {
    m.failures += o.failures;
    if (o.sample) corpus.samples.push_back(std::move(*o.sample));
  }
  recount(corpus);
  return corpus;
}

}  // namespace

Corpus compose_split(const Schema& schema, const CompositionSpec& spec, const ComposeOptions& options) {
  if (spec.kind != CompositionKind::percentage)
    throw std::invalid_argument("compose_split needs a percentage spec");
  std::vector<Job> jobs;
  for (const auto& [domain, count] : spec.targets) {
    if (!schema.find_domain(domain))
      throw ValidationError("targets." + domain, "domain not in schema");
    const auto counts = category_counts(count);
    for (std::size_t c = 0; c < kFlowCategories.size(); ++c)
      for (std::uint64_t k = 0; k < counts[c]; ++k) jobs.push_back({domain, kFlowCategories[c], std::nullopt});
  }
  return run_jobs(schema, spec, options, jobs);
}

Corpus compose_unique_all(const Schema& schema, const CompositionSpec& spec,
                          const ComposeOptions& options) {
  if (spec.kind != CompositionKind::unique_all)
    throw std::invalid_argument("compose_unique_all needs a unique_all spec");
  if (spec.copies == 0) throw std::invalid_argument("copies must be at least 1");
  std::vector<Job> jobs;
  for (const auto& flow : enumerate_flows(schema))
    for (std::uint64_t c = 0; c < spec.copies; ++c)
      jobs.push_back({flow.domain, category_of(flow.pair), flow.pair});
  return run_jobs(schema, spec, options, jobs);
}

Corpus compose(const Schema& schema, const CompositionSpec& spec, const ComposeOptions& options) {
  return spec.kind == CompositionKind::percentage ? compose_split(schema, spec, options)
                                                  : compose_unique_all(schema, spec, options);
}

Corpus refine_corpus(const Corpus& corpus, LlmBackend& backend, const RefinerConfig& config,
                     unsigned workers) {
  std::vector<std::optional<TurnSample>> refined(corpus.samples.size());
  detail::parallel_for(corpus.samples.size(), workers, [&](std::size_t i) {
    TurnSample s = corpus.samples[i];
    try {
      apply_refinement(s, backend, config);
      refined[i] = std::move(s);
    } catch (const RefinementFailed&) {
    }
  });
  Corpus out;
  out.manifest = corpus.manifest;
  out.manifest.spec.refinement = RefinementMode::full;
  out.manifest.spec.strategy = config.strategy;
  out.manifest.backend = backend.describe();
  for (auto& s : refined) {
    if (s)
      out.samples.push_back(std::move(*s));
    else
      ++out.manifest.failures;
  }
  recount(out);
  return out;
}

// ----------------------------------------------------------- persistence

namespace {

ordered_json state_to_json(const DialogueState& state) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : state) j[k.str()] = v;
  return j;
}

ordered_json delta_to_json(const TurnDelta& delta) {
  std::map<std::string, std::string> merged;
  for (const auto& [k, v] : delta.updates) merged[k.str()] = v;
  for (const auto& k : delta.deletions) merged[k.str()] = std::string(kDeleteSentinel);
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : merged) j[k] = v;
  return j;
}

ordered_json act_to_json(const DialogueAct& act) {
  ordered_json j;
  j["intent"] = std::string(to_string(act.intent));
  j["domain"] = act.domain;
  j["slot_values"] = ordered_json::array();
  for (const auto& sv : act.slot_values)
    j["slot_values"].push_back(ordered_json{{"slot", sv.slot}, {"value", sv.value}});
  return j;
}

ordered_json record_to_json(const RefinementRecord& r) {
  ordered_json j;
  j["template_text"] = r.template_text;
  j["modified_text"] = r.modified_text;
  j["paraphrased_text"] = r.paraphrased_text;
  j["paraphrase_prompt_index"] = r.paraphrase_prompt_index;
  j["calls"] = ordered_json::array();
  for (const auto& c : r.calls)
    j["calls"].push_back(ordered_json{{"kind", std::string(to_string(c.kind))},
                                      {"input_tokens", c.usage.input_tokens},
                                      {"output_tokens", c.usage.output_tokens},
                                      {"attempts", c.attempts}});
  return j;
}

ordered_json sample_to_json(const TurnSample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["domain"] = s.domain;
  j["flow_category"] = std::string(to_string(s.flow_category));
  j["history"] = state_to_json(s.history);
  j["system_template"] = s.system_template;
  j["user_template"] = s.user_template;
  j["system_utterance"] = s.system_utterance;
  j["user_utterance"] = s.user_utterance;
  j["turn_state"] = delta_to_json(s.turn_delta);
  j["full_state"] = state_to_json(s.full_state);
  const Provenance& p = s.provenance;
  ordered_json pj;
  pj["seed"] = p.seed;
  pj["sample_index"] = p.sample_index;
  pj["attempt"] = p.attempt;
  pj["replacement"] = p.replacement;
  pj["strategy"] = p.strategy;
  pj["system_acts"] = ordered_json::array();
  for (const auto& a : p.system_acts) pj["system_acts"].push_back(act_to_json(a));
  pj["user_acts"] = ordered_json::array();
  for (const auto& a : p.user_acts) pj["user_acts"].push_back(act_to_json(a));
  pj["system_template_ids"] = p.system_template_ids;
  pj["user_template_ids"] = p.user_template_ids;
  if (p.refinement)
    pj["refinement"] = ordered_json{{"system", record_to_json(p.refinement->system)},
                                    {"user", record_to_json(p.refinement->user)}};
  j["provenance"] = std::move(pj);
  return j;
}

ordered_json manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["format"] = "dialsynth-corpus";
  j["tool_version"] = m.tool_version;
  j["spec"] = spec_to_json(m.spec);
  j["schema_version"] = m.schema_version;
  j["schema_source"] = m.schema_source;
  j["template_source"] = m.template_source;
  j["backend"] = m.backend;
  j["counts"] = ordered_json{{"domains", m.domain_counts}, {"categories", m.category_counts}};
  j["grounding_rate"] = m.grounding_rate;
  j["failures"] = m.failures;
  j["sample_count"] = m.sample_count;
  return j;
}

DialogueState state_from_json(const json& j, const std::string& path) {
  jsonutil::require_object(j, path);
  DialogueState state;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ParseError(path + "." + k, "expected a string value");
    try {
      state.set(SlotKey::parse(k), v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(path + "." + k, e.what());
    }
  }
  return state;
}

TurnDelta delta_from_json(const json& j, const std::string& path) {
  TurnDelta delta;
  for (const auto& [k, v] : state_from_json(j, path)) {
    if (v == kDeleteSentinel)
      delta.deletions.insert(k);
    else
      delta.updates.set(k, v);
  }
  return delta;
}

DialogueAct act_from_json(const json& j, const std::string& path, Side side) {
  jsonutil::require_object(j, path);
  jsonutil::reject_unknown(j, path, {"intent", "domain", "slot_values"});
  DialogueAct a;
  const std::string name = jsonutil::get_string(j, path, "intent");
  if (side == Side::system) {
    auto i = parse_system_intent(name);
    if (!i) throw ParseError(path + ".intent", "unknown system intent '" + name + "'");
    a.intent = *i;
  } else {
    auto i = parse_user_intent(name);
    if (!i) throw ParseError(path + ".intent", "unknown user intent '" + name + "'");
    a.intent = *i;
  }
  a.mode = act_mode(a.intent);
  a.domain = jsonutil::get_string(j, path, "domain");
  const json& svs = jsonutil::get_array(j, path, "slot_values");
  for (std::size_t i = 0; i < svs.size(); ++i) {
    const std::string sp = path + ".slot_values[" + std::to_string(i) + "]";
    jsonutil::require_object(svs[i], sp);
    jsonutil::reject_unknown(svs[i], sp, {"slot", "value"});
    a.slot_values.push_back(
        {a.domain, jsonutil::get_string(svs[i], sp, "slot"), jsonutil::get_string(svs[i], sp, "value")});
  }
  return a;
}

std::vector<std::size_t> ids_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) throw ParseError(path, "expected non-negative integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

RefinementRecord record_from_json(const json& j, const std::string& path, Side role) {
  jsonutil::require_object(j, path);
  jsonutil::reject_unknown(j, path, {"template_text", "modified_text", "paraphrased_text",
                                     "paraphrase_prompt_index", "calls"});
  RefinementRecord r;
  r.role = role;
  r.template_text = jsonutil::get_string(j, path, "template_text");
  r.modified_text = jsonutil::get_string(j, path, "modified_text");
  r.paraphrased_text = jsonutil::get_string(j, path, "paraphrased_text");
  r.paraphrase_prompt_index = static_cast<unsigned>(jsonutil::get_uint(j, path, "paraphrase_prompt_index"));
  if (r.paraphrase_prompt_index > 3)
    throw ParseError(path + ".paraphrase_prompt_index", "must be in 0..3");
  const json& calls = jsonutil::get_array(j, path, "calls");
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const std::string cp = path + ".calls[" + std::to_string(i) + "]";
    jsonutil::require_object(calls[i], cp);
    jsonutil::reject_unknown(calls[i], cp, {"kind", "input_tokens", "output_tokens", "attempts"});
    CallRecord c;
    const std::string kind = jsonutil::get_string(calls[i], cp, "kind");
    if (kind == "modify")
      c.kind = CallKind::modify;
    else if (kind == "paraphrase")
      c.kind = CallKind::paraphrase;
    else
      throw ParseError(cp + ".kind", "expected 'modify' or 'paraphrase'");
    c.usage.input_tokens = jsonutil::get_uint(calls[i], cp, "input_tokens");
    c.usage.output_tokens = jsonutil::get_uint(calls[i], cp, "output_tokens");
    c.attempts = static_cast<unsigned>(jsonutil::get_uint(calls[i], cp, "attempts"));
    r.calls.push_back(c);
  }
  return r;
}

TurnSample sample_from_json(const json& j) {
  const std::string path = "$";
  jsonutil::require_object(j, path);
  jsonutil::reject_unknown(j, path, {"id", "domain", "flow_category", "history", "system_template",
                                     "user_template", "system_utterance", "user_utterance",
                                     "turn_state", "full_state", "provenance"});
  TurnSample s;
  s.id = jsonutil::get_string(j, path, "id");
  s.domain = jsonutil::get_string(j, path, "domain");
  const std::string cat = jsonutil::get_string(j, path, "flow_category");
  auto category = parse_flow_category(cat);
  if (!category) throw ParseError("$.flow_category", "unknown flow category '" + cat + "'");
  s.flow_category = *category;
  s.history = state_from_json(jsonutil::field(j, path, "history"), "$.history");
  s.system_template = jsonutil::get_string(j, path, "system_template");
  s.user_template = jsonutil::get_string(j, path, "user_template");
  s.system_utterance = jsonutil::get_string(j, path, "system_utterance");
  s.user_utterance = jsonutil::get_string(j, path, "user_utterance");
  s.turn_delta = delta_from_json(jsonutil::field(j, path, "turn_state"), "$.turn_state");
  s.full_state = state_from_json(jsonutil::field(j, path, "full_state"), "$.full_state");

  const std::string pp = "$.provenance";
  const json& pj = jsonutil::field(j, path, "provenance");
  jsonutil::require_object(pj, pp);
  jsonutil::reject_unknown(pj, pp, {"seed", "sample_index", "attempt", "replacement", "strategy",
                                    "system_acts", "user_acts", "system_template_ids",
                                    "user_template_ids", "refinement"});
  Provenance& p = s.provenance;
  p.seed = jsonutil::get_uint(pj, pp, "seed");
  p.sample_index = jsonutil::get_uint(pj, pp, "sample_index");
  p.attempt = static_cast<unsigned>(jsonutil::get_uint(pj, pp, "attempt"));
  p.replacement = static_cast<unsigned>(jsonutil::get_uint(pj, pp, "replacement"));
  p.strategy = jsonutil::get_string(pj, pp, "strategy");
  const json& sys = jsonutil::get_array(pj, pp, "system_acts");
  for (std::size_t i = 0; i < sys.size(); ++i)
    p.system_acts.push_back(act_from_json(sys[i], pp + ".system_acts[" + std::to_string(i) + "]", Side::system));
  const json& usr = jsonutil::get_array(pj, pp, "user_acts");
  for (std::size_t i = 0; i < usr.size(); ++i)
    p.user_acts.push_back(act_from_json(usr[i], pp + ".user_acts[" + std::to_string(i) + "]", Side::user));
  if (p.system_acts.empty() || p.user_acts.empty())
    throw ParseError(pp, "a sample needs at least one system and one user act");
  p.system_template_ids = ids_from_json(jsonutil::field(pj, pp, "system_template_ids"), pp + ".system_template_ids");
  p.user_template_ids = ids_from_json(jsonutil::field(pj, pp, "user_template_ids"), pp + ".user_template_ids");
  if (pj.contains("refinement")) {
    const json& rj = pj["refinement"];
    jsonutil::require_object(rj, pp + ".refinement");
    jsonutil::reject_unknown(rj, pp + ".refinement", {"system", "user"});
    RefinedPair pair;
    pair.system = record_from_json(jsonutil::field(rj, pp + ".refinement", "system"),
                                   pp + ".refinement.system", Side::system);
    pair.user = record_from_json(jsonutil::field(rj, pp + ".refinement", "user"),
                                 pp + ".refinement.user", Side::user);
    p.refinement = std::move(pair);
  }
  if (apply(s.history, s.turn_delta) != s.full_state)
    throw ParseError("$.full_state", "full_state does not equal history plus turn_state");
  return s;
}

std::map<std::string, std::uint64_t> count_map(const json& j, const std::string& path) {
  jsonutil::require_object(j, path);
  std::map<std::string, std::uint64_t> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number_unsigned()) throw ParseError(path + "." + k, "expected a non-negative integer");
    out[k] = v.get<std::uint64_t>();
  }
  return out;
}

Manifest manifest_from_json(const json& j) {
  const std::string path = "$";
  jsonutil::require_object(j, path);
  jsonutil::reject_unknown(j, path, {"format", "tool_version", "spec", "schema_version",
                                     "schema_source", "template_source", "backend", "counts",
                                     "grounding_rate", "failures", "sample_count"});
  if (jsonutil::get_string(j, path, "format") != "dialsynth-corpus")
    throw ParseError("$.format", "not a dialsynth corpus header");
  Manifest m;
  m.tool_version = jsonutil::get_string(j, path, "tool_version");
  m.spec = spec_from_json(jsonutil::field(j, path, "spec"), "$.spec");
  m.schema_version = jsonutil::get_string(j, path, "schema_version");
  m.schema_source = jsonutil::get_string(j, path, "schema_source");
  m.template_source = jsonutil::get_string(j, path, "template_source");
  m.backend = jsonutil::get_string(j, path, "backend");
  const json& counts = jsonutil::field(j, path, "counts");
  jsonutil::require_object(counts, "$.counts");
  jsonutil::reject_unknown(counts, "$.counts", {"domains", "categories"});
  m.domain_counts = count_map(jsonutil::field(counts, "$.counts", "domains"), "$.counts.domains");
  m.category_counts = count_map(jsonutil::field(counts, "$.counts", "categories"), "$.counts.categories");
  const json& rate = jsonutil::field(j, path, "grounding_rate");
  if (!rate.is_number()) throw ParseError("$.grounding_rate", "expected a number");
  m.grounding_rate = rate.get<double>();
  m.failures = jsonutil::get_uint(j, path, "failures");
  m.sample_count = jsonutil::get_uint(j, path, "sample_count");
  return m;
}

std::string line_label(std::size_t n) { return "line " + std::to_string(n); }

}  // namespace

std::string write_corpus(const Corpus& corpus) {
  std::string out = manifest_to_json(corpus.manifest).dump() + "\n";
  for (const auto& s : corpus.samples) out += sample_to_json(s).dump() + "\n";
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  out << write_corpus(corpus);
  if (!out) throw std::runtime_error("failed writing corpus " + path.string());
}

Corpus read_corpus(std::string_view text) {
  Corpus corpus;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    const bool terminated = end != std::string_view::npos;
    if (!terminated) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string label = line_label(line_no);
    try {
      const json j = jsonutil::parse(line, "$");
      if (!have_header) {
        corpus.manifest = manifest_from_json(j);
        have_header = true;
      } else {
        corpus.samples.push_back(sample_from_json(j));
      }
    } catch (const ParseError& e) {
      throw ParseError(label, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(label, e.what());
    }
    if (!terminated) throw ParseError(label, "truncated record (no trailing newline)");
  }
  if (!have_header) throw ParseError(line_label(1), "missing manifest header");
  Corpus check = corpus;
  recount(check);
  if (check.manifest.sample_count != corpus.manifest.sample_count)
    throw ParseError(line_label(1), "manifest announces " + std::to_string(corpus.manifest.sample_count) +
                                        " samples, file holds " + std::to_string(corpus.samples.size()));
  if (check.manifest.domain_counts != corpus.manifest.domain_counts ||
      check.manifest.category_counts != corpus.manifest.category_counts)
    throw ParseError(line_label(1), "manifest counts do not match the samples");
  return corpus;
}

Corpus read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return read_corpus(buf.str());
}

// ----------------------------------------------------------------- stats

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.sample_count = corpus.samples.size();
  for (auto c : kFlowCategories) st.per_category[std::string(to_string(c))] = 0;
  if (corpus.samples.empty()) return st;
  std::uint64_t grounded = 0, sys_words = 0, user_words = 0;
  for (const auto& s : corpus.samples) {
    ++st.per_domain[s.domain];
    ++st.per_category[std::string(to_string(s.flow_category))];
    if (sample_grounded(s)) ++grounded;
    sys_words += approximate_tokens(s.system_utterance);
    user_words += approximate_tokens(s.user_utterance);
    const auto pair = s.intents();
    ++st.intent_pairs[std::string(to_string(pair.system)) + "->" + std::string(to_string(pair.user))];
  }
  const double n = static_cast<double>(corpus.samples.size());
  st.grounding_rate = static_cast<double>(grounded) / n;
  st.mean_system_words = static_cast<double>(sys_words) / n;
  st.mean_user_words = static_cast<double>(user_words) / n;
  return st;
}

std::string stats_json(const CorpusStats& st) {
  ordered_json j;
  j["sample_count"] = st.sample_count;
  j["per_domain"] = st.per_domain;
  j["per_category"] = st.per_category;
  j["grounding_rate"] = st.grounding_rate;
  j["mean_system_words"] = st.mean_system_words;
  j["mean_user_words"] = st.mean_user_words;
  j["intent_pairs"] = st.intent_pairs;
  return j.dump(2) + "\n";
}

// ------------------------------------------------------------------ cost

CostReport estimate_cost(std::uint64_t sample_count, const CallAverages& averages,
                         const Prices& prices, double overhead_factor) {
  if (prices.input_per_1k < 0 || prices.output_per_1k < 0 || overhead_factor < 0)
    throw std::invalid_argument("prices and overhead must be non-negative");
  double per_sample = 0;
  for (const auto& a : averages) {
    if (a.input < 0 || a.output < 0) throw std::invalid_argument("token averages must be non-negative");
    per_sample += a.input * prices.input_per_1k + a.output * prices.output_per_1k;
  }
  CostReport r;
  r.sample_count = sample_count;
  r.naive = static_cast<double>(sample_count) * per_sample / 1000.0;
  r.overhead_factor = overhead_factor;
  r.reported = r.naive * overhead_factor;
  return r;
}

std::optional<CallAverages> builtin_call_averages(std::string_view spec_name) {
  if (spec_name == "mw-1pct")
    return CallAverages{{{120.46, 28.93}, {114.02, 25.63}, {41.09, 30.15}, {37.98, 26.90}}};
  if (spec_name == "mw-5pct")
    return CallAverages{{{119.54, 27.95}, {114.27, 25.78}, {40.23, 29.52}, {37.83, 26.46}}};
  if (spec_name == "mw-10pct")
    return CallAverages{{{119.95, 28.23}, {114.14, 25.91}, {40.37, 29.41}, {38.06, 26.54}}};
  return std::nullopt;
}

std::optional<CallAverages> measured_call_averages(const Corpus& corpus) {
  std::array<double, 4> in{}, out{};
  std::array<std::uint64_t, 4> n{};
  for (const auto& s : corpus.samples) {
    if (!s.provenance.refinement) continue;
    const auto& r = *s.provenance.refinement;
    for (const auto* rec : {&r.system, &r.user}) {
      const std::size_t base = rec->role == Side::system ? 0 : 1;
      for (const auto& c : rec->calls) {
        const std::size_t k = base + (c.kind == CallKind::modify ? 0 : 2);
        in[k] += static_cast<double>(c.usage.input_tokens);
        out[k] += static_cast<double>(c.usage.output_tokens);
        ++n[k];
      }
    }
  }
  if (n[0] == 0) return std::nullopt;
  CallAverages avg{};
  for (std::size_t k = 0; k < 4; ++k)
    if (n[k]) avg[k] = {in[k] / static_cast<double>(n[k]), out[k] / static_cast<double>(n[k])};
  return avg;
}

}  // namespace dialsynth
