#include "dialsynth/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dialsynth/corpus.hpp"
#include "dialsynth/errors.hpp"
#include "dialsynth/icl/episodes.hpp"
#include "dialsynth/icl/evaluator.hpp"
#include "dialsynth/icl/normalize.hpp"
#include "dialsynth/icl/retrieval.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/refiner.hpp"
#include "dialsynth/schema.hpp"
#include "dialsynth/template_engine.hpp"
#include "json_util.hpp"

namespace dialsynth::cli {

namespace {

namespace fs = std::filesystem;

class MissingInput : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  std::string schema_path;
  std::string templates_path;
  std::uint64_t seed = 0;
  unsigned workers = 8;
  bool verbose = false;
};

struct BackendFlags {
  std::string backend = "mock";
  std::string model = "gpt-3.5-turbo";
  std::string base_url = "https://api.openai.com/v1";
  double temperature = 0.7;
  unsigned retries = 3;
  unsigned timeout_s = 30;
  std::uint64_t tokens_per_minute = 0;
  std::string strategy = "utterance_level";
  std::string record_fixture;
};

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw MissingInput("missing input: " + flag + " is required");
  if (!fs::exists(path)) throw MissingInput("missing input: " + flag + " " + path + " does not exist");
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path);
}

Schema load_schema_option(const Common& c) {
  if (c.schema_path.empty()) return builtin_schema();
  require_file(c.schema_path, "--schema");
  return load_schema_file(c.schema_path);
}

TemplateBank load_bank_option(const Common& c) {
  if (c.templates_path.empty()) return builtin_template_bank();
  require_file(c.templates_path, "--templates");
  return load_template_bank_file(c.templates_path);
}

RefinementStrategy strategy_option(const std::string& name) {
  auto s = parse_refinement_strategy(name);
  if (!s) throw UsageError("unknown strategy '" + name + "' (utterance_level, multi_step, dialogue_level)");
  return *s;
}

struct Backend {
  std::unique_ptr<LlmBackend> owned;
  std::unique_ptr<RecordingBackend> recorder;
  LlmBackend* active = nullptr;
  GenerationParams params;
};

Backend open_backend(const BackendFlags& f, const Common& c) {
  if (f.backend.rfind("scripted:", 0) == 0) require_file(f.backend.substr(9), "--backend scripted:");
  RemoteOptions remote;
  remote.base_url = f.base_url;
  remote.verbose = c.verbose;
  remote.tokens_per_minute = f.tokens_per_minute;
  BackendSelection sel = make_backend(f.backend, remote);
  Backend b;
  b.owned = std::move(sel.backend);
  b.active = b.owned.get();
  b.params.model = sel.model.empty() ? f.model : sel.model;
  b.params.temperature = f.temperature;
  b.params.timeout = std::chrono::seconds(f.timeout_s);
  if (!f.record_fixture.empty()) {
    b.recorder = std::make_unique<RecordingBackend>(*b.owned);
    b.active = b.recorder.get();
  }
  return b;
}

RefinerConfig refiner_config(const BackendFlags& f, const Backend& b) {
  RefinerConfig rc;
  rc.strategy = strategy_option(f.strategy);
  rc.params = b.params;
  rc.retry.max_attempts = f.retries;
  return rc;
}

void finish_recording(const BackendFlags& f, const Backend& b) {
  if (b.recorder) emit(b.recorder->fixture_document(), f.record_fixture, std::cout);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--schema", c.schema_path, "Schema JSON (default: builtin five-domain schema)");
  app->add_option("--templates", c.templates_path, "Template bank JSON (default: builtin bank)");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--workers", c.workers, "Concurrent samples / episodes")->check(CLI::PositiveNumber);
  app->add_flag("-v,--verbose", c.verbose, "Log backend traffic (credentials redacted)");
}

void add_backend(CLI::App* app, BackendFlags& f, bool refinement) {
  app->add_option("--backend", f.backend, "mock | scripted:<fixture> | remote:<model>");
  app->add_option("--model", f.model, "Model name when not given in --backend");
  app->add_option("--base-url", f.base_url, "Chat-completion API base URL");
  app->add_option("--temperature", f.temperature, "Sampling temperature");
  app->add_option("--retries", f.retries, "Attempts per backend call")->check(CLI::PositiveNumber);
  app->add_option("--timeout", f.timeout_s, "Per-call timeout in seconds");
  app->add_option("--tokens-per-minute", f.tokens_per_minute, "Token rate limit (0 = off)");
  app->add_option("--record-fixture", f.record_fixture, "Write prompt/response pairs as a scripted fixture");
  if (refinement)
    app->add_option("--strategy", f.strategy, "utterance_level | multi_step | dialogue_level");
}

int dispatch(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Common common;
  BackendFlags bflags;

  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(DIALSYNTH_VERSION));

  // generate / compose
  std::string spec_name = "mw-1pct";
  std::string corpus_out;
  std::string refinement_override;
  auto* generate = app.add_subcommand("generate", "Template-only corpus (structure + templates)");
  add_common(generate, common);
  generate->add_option("--spec", spec_name, "Builtin spec name or spec JSON path");
  generate->add_option("-o,--out", corpus_out, "Corpus output path (default: stdout)");

  auto* compose_cmd = app.add_subcommand("compose", "Full pipeline for a composition spec");
  add_common(compose_cmd, common);
  add_backend(compose_cmd, bflags, true);
  compose_cmd->add_option("--spec", spec_name, "Builtin spec name or spec JSON path");
  compose_cmd->add_option("--refinement", refinement_override, "none | full (overrides the spec)");
  compose_cmd->add_option("-o,--out", corpus_out, "Corpus output path (default: stdout)");

  // refine
  std::string corpus_in;
  auto* refine = app.add_subcommand("refine", "Refine the utterances of a template-only corpus");
  add_common(refine, common);
  add_backend(refine, bflags, true);
  refine->add_option("--corpus", corpus_in, "Input corpus");
  refine->add_option("-o,--out", corpus_out, "Output corpus (default: stdout)");

  // eval
  std::string episodes_path, multiwoz_path, pool_corpus, pool_episodes, mode_name = "few_shot_retrieval";
  std::string normalizer_path, report_out, embedding_model, embedding_url;
  std::size_t k = 10;
  std::size_t value_bound = 5;
  bool transcript = false;
  auto* eval = app.add_subcommand("eval", "In-context DST evaluation (JGA)");
  add_common(eval, common);
  add_backend(eval, bflags, false);
  eval->add_option("--episodes", episodes_path, "Episode JSONL file");
  eval->add_option("--multiwoz", multiwoz_path, "MultiWOZ-style data.json to import as episodes");
  eval->add_option("--pool", pool_corpus, "Corpus used as the exemplar pool");
  eval->add_option("--pool-episodes", pool_episodes, "Episode JSONL used as the exemplar pool");
  eval->add_option("--mode", mode_name, "zero_shot | few_shot_random | few_shot_retrieval");
  eval->add_option("-k", k, "Retrieved exemplars per turn");
  eval->add_option("--value-bound", value_bound, "Values listed per categorical slot in the ontology");
  eval->add_option("--normalizer", normalizer_path, "Value normalization config JSON");
  eval->add_option("--embedding-model", embedding_model, "Score with an embedding endpoint instead of TF cosine");
  eval->add_option("--embedding-url", embedding_url, "Embedding API base URL (default: --base-url)");
  eval->add_option("--report", report_out, "Report output path (default: stdout)");
  eval->add_flag("--transcript", transcript, "Include the per-turn transcript in the report");

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_out;
  stats->add_option("--corpus", corpus_in, "Corpus file");
  stats->add_option("-o,--out", stats_out, "Report output path (default: stdout)");

  // cost
  std::string cost_spec, averages_row, cost_corpus, cost_out;
  std::uint64_t count = 0;
  double overhead = kDefaultOverhead;
  Prices prices;
  auto* cost = app.add_subcommand("cost", "LLM refinement cost estimate");
  cost->add_option("--spec", cost_spec, "Spec whose sample count (and token averages) to use");
  cost->add_option("--count", count, "Sample count (overrides --spec)");
  cost->add_option("--averages", averages_row, "Builtin token-average row (mw-1pct, mw-5pct, mw-10pct)");
  cost->add_option("--corpus", cost_corpus, "Measure token averages from a refined corpus");
  cost->add_option("--overhead", overhead, "Overhead factor")->check(CLI::NonNegativeNumber);
  cost->add_option("--price-in", prices.input_per_1k, "USD per 1000 input tokens")->check(CLI::NonNegativeNumber);
  cost->add_option("--price-out", prices.output_per_1k, "USD per 1000 output tokens")->check(CLI::NonNegativeNumber);
  cost->add_option("-o,--out", cost_out, "Report output path (default: stdout)");

  // exports
  std::string export_out;
  auto* export_templates = app.add_subcommand("export-templates", "Write the template bank as JSON");
  add_common(export_templates, common);
  export_templates->add_option("-o,--out", export_out, "Output path (default: stdout)");
  auto* export_transitions_cmd = app.add_subcommand("export-transitions", "Write the intent transition table as JSON");
  export_transitions_cmd->add_option("-o,--out", export_out, "Output path (default: stdout)");
  auto* export_schema = app.add_subcommand("export-schema", "Write the schema as JSON");
  add_common(export_schema, common);
  export_schema->add_option("-o,--out", export_out, "Output path (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << DIALSYNTH_VERSION << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsageError;
  }

  if (generate->parsed() || compose_cmd->parsed()) {
    const Schema schema = load_schema_option(common);
    const TemplateBank bank = load_bank_option(common);
    if (spec_name.find('/') != std::string::npos || spec_name.find(".json") != std::string::npos)
      require_file(spec_name, "--spec");
    CompositionSpec spec = load_spec(spec_name);
    spec.seed = common.seed;
    ComposeOptions opts;
    opts.bank = &bank;
    opts.workers = common.workers;
    opts.schema_source = common.schema_path.empty() ? "builtin" : common.schema_path;
    opts.template_source = common.templates_path.empty() ? "builtin" : common.templates_path;
    Backend backend;
    if (generate->parsed()) {
      spec.refinement = RefinementMode::none;
    } else {
      if (refinement_override == "none")
        spec.refinement = RefinementMode::none;
      else if (refinement_override == "full")
        spec.refinement = RefinementMode::full;
      else if (!refinement_override.empty())
        throw UsageError("--refinement must be 'none' or 'full'");
      spec.strategy = strategy_option(bflags.strategy);
      if (spec.refinement == RefinementMode::full) {
        backend = open_backend(bflags, common);
        opts.backend = backend.active;
        opts.refiner = refiner_config(bflags, backend);
      }
    }
    opts.refiner.strategy = spec.strategy;
    const Corpus corpus = compose(schema, spec, opts);
    emit(write_corpus(corpus), corpus_out, out);
    finish_recording(bflags, backend);
    err << "wrote " << corpus.samples.size() << " samples (" << corpus.manifest.failures
        << " failures, grounding " << corpus.manifest.grounding_rate << ")\n";
    return kOk;
  }

  if (refine->parsed()) {
    require_file(corpus_in, "--corpus");
    const Corpus corpus = read_corpus_file(corpus_in);
    Backend backend = open_backend(bflags, common);
    const Corpus refined = refine_corpus(corpus, *backend.active, refiner_config(bflags, backend), common.workers);
    emit(write_corpus(refined), corpus_out, out);
    finish_recording(bflags, backend);
    err << "refined " << refined.samples.size() << " samples (" << refined.manifest.failures << " failures)\n";
    return kOk;
  }

  if (eval->parsed()) {
    auto mode = icl::parse_eval_mode(mode_name);
    if (!mode) throw UsageError("unknown mode '" + mode_name + "'");
    const Schema schema = load_schema_option(common);
    std::vector<icl::EvalEpisode> episodes;
    if (!multiwoz_path.empty()) {
      require_file(multiwoz_path, "--multiwoz");
      episodes = icl::import_multiwoz_file(multiwoz_path, schema);
    } else {
      require_file(episodes_path, "--episodes");
      episodes = icl::read_episodes_file(episodes_path);
    }
    icl::ExamplePool pool;
    if (!pool_corpus.empty()) {
      require_file(pool_corpus, "--pool");
      pool = icl::pool_from_corpus(read_corpus_file(pool_corpus));
    } else if (!pool_episodes.empty()) {
      require_file(pool_episodes, "--pool-episodes");
      pool = icl::pool_from_episodes(icl::read_episodes_file(pool_episodes));
    } else if (*mode != icl::EvalMode::zero_shot) {
      throw MissingInput("missing input: --pool or --pool-episodes is required for " + mode_name);
    }
    icl::EvalConfig cfg;
    cfg.mode = *mode;
    cfg.k = k;
    cfg.seed = common.seed;
    cfg.value_bound = value_bound;
    cfg.workers = common.workers;
    cfg.retry.max_attempts = bflags.retries;
    if (!normalizer_path.empty()) {
      require_file(normalizer_path, "--normalizer");
      cfg.normalizer = icl::load_normalizer_config(normalizer_path);
    }
    std::unique_ptr<icl::EmbeddingScorer> embedder;
    if (!embedding_model.empty()) {
      icl::EmbeddingOptions eo;
      eo.base_url = embedding_url.empty() ? bflags.base_url : embedding_url;
      eo.model = embedding_model;
      const char* key = std::getenv("API_KEY");
      if (!key || !*key) throw CredentialError("embedding scorer requires the API_KEY environment variable");
      eo.api_key = key;
      embedder = std::make_unique<icl::EmbeddingScorer>(eo);
      cfg.scorer = embedder.get();
    }
    Backend backend = open_backend(bflags, common);
    cfg.params = backend.params;
    const icl::JgaReport report = icl::evaluate(episodes, pool, schema, *backend.active, cfg);
    emit(icl::report_json(report, transcript), report_out, out);
    finish_recording(bflags, backend);
    return kOk;
  }

  if (stats->parsed()) {
    require_file(corpus_in, "--corpus");
    emit(stats_json(corpus_stats(read_corpus_file(corpus_in))), stats_out, out);
    return kOk;
  }

  if (cost->parsed()) {
    std::uint64_t n = count;
    std::optional<CallAverages> averages;
    if (!cost_corpus.empty()) {
      require_file(cost_corpus, "--corpus");
      const Corpus corpus = read_corpus_file(cost_corpus);
      averages = measured_call_averages(corpus);
      if (!averages) throw ValidationError(cost_corpus, "corpus carries no refinement records");
      if (n == 0) n = corpus.samples.size();
    }
    if (!cost_spec.empty()) {
      auto spec = builtin_spec(cost_spec);
      if (!spec) {
        require_file(cost_spec, "--spec");
        spec = load_spec(cost_spec);
      }
      if (n == 0) n = spec->target_total();
      if (!averages && averages_row.empty()) averages = builtin_call_averages(spec->name);
    }
    if (!averages_row.empty()) {
      averages = builtin_call_averages(averages_row);
      if (!averages) throw UsageError("unknown averages row '" + averages_row + "'");
    }
    if (!averages) averages = builtin_call_averages("mw-1pct");
    const CostReport r = estimate_cost(n, *averages, prices, overhead);
    jsonutil::ordered_json j;
    j["sample_count"] = r.sample_count;
    j["price_in_per_1k"] = prices.input_per_1k;
    j["price_out_per_1k"] = prices.output_per_1k;
    j["naive_usd"] = r.naive;
    j["overhead_factor"] = r.overhead_factor;
    j["estimated_usd"] = r.reported;
    emit(j.dump(2) + "\n", cost_out, out);
    return kOk;
  }

  if (export_templates->parsed()) {
    emit(write_template_bank(load_bank_option(common)), export_out, out);
    return kOk;
  }
  if (export_transitions_cmd->parsed()) {
    emit(dialsynth::export_transitions(), export_out, out);
    return kOk;
  }
  if (export_schema->parsed()) {
    emit(write_schema(load_schema_option(common)), export_out, out);
    return kOk;
  }
  return kUsageError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic dialogue-state-tracking data generator and in-context DST evaluator", "dialsynth"};
  try {
    return dispatch(app, args, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const MissingInput& e) {
    err << "error: " << e.what() << "\n";
    return kMissingInput;
  } catch (const CredentialError& e) {
    err << "error: " << e.what() << "\n";
    return kCredentialError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dialsynth::cli
