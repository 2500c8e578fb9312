#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dialsynth/cli.hpp"
#include "dialsynth/corpus.hpp"
#include "dialsynth/dialogue_model.hpp"
#include "dialsynth/errors.hpp"
#include "dialsynth/icl/episodes.hpp"
#include "dialsynth/icl/evaluator.hpp"
#include "dialsynth/icl/retrieval.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/refiner.hpp"
#include "dialsynth/schema.hpp"
#include "dialsynth/template_engine.hpp"

namespace py = pybind11;
using namespace dialsynth;

namespace {

Schema schema_or_builtin(const std::optional<std::string>& path) {
  return path ? load_schema_file(*path) : builtin_schema();
}

std::string compose_corpus(const std::string& spec_name, std::uint64_t seed, const std::string& refinement,
                           const std::string& strategy, const std::string& backend, unsigned workers,
                           const std::optional<std::string>& schema_path,
                           const std::optional<std::string>& templates_path) {
  const Schema schema = schema_or_builtin(schema_path);
  const TemplateBank bank = templates_path ? load_template_bank_file(*templates_path) : builtin_template_bank();
  CompositionSpec spec = load_spec(spec_name);
  spec.seed = seed;
  if (refinement == "none")
    spec.refinement = RefinementMode::none;
  else if (refinement == "full")
    spec.refinement = RefinementMode::full;
  else if (!refinement.empty())
    throw std::invalid_argument("refinement must be 'none' or 'full'");
  auto strat = parse_refinement_strategy(strategy);
  if (!strat) throw std::invalid_argument("unknown strategy '" + strategy + "'");
  spec.strategy = *strat;

  ComposeOptions opts;
  opts.bank = &bank;
  opts.workers = workers;
  opts.schema_source = schema_path.value_or("builtin");
  opts.template_source = templates_path.value_or("builtin");
  opts.refiner.strategy = *strat;
  BackendSelection sel;
  if (spec.refinement == RefinementMode::full) {
    sel = make_backend(backend);
    opts.backend = sel.backend.get();
    if (!sel.model.empty()) opts.refiner.params.model = sel.model;
  }
  py::gil_scoped_release release;
  return write_corpus(compose(schema, spec, opts));
}

py::dict cost(std::uint64_t count, const std::string& row, double overhead, double price_in, double price_out) {
  auto averages = builtin_call_averages(row);
  if (!averages) throw std::invalid_argument("unknown averages row '" + row + "'");
  Prices prices;
  prices.input_per_1k = price_in;
  prices.output_per_1k = price_out;
  const CostReport r = estimate_cost(count, *averages, prices, overhead);
  py::dict d;
  d["sample_count"] = r.sample_count;
  d["naive_usd"] = r.naive;
  d["overhead_factor"] = r.overhead_factor;
  d["estimated_usd"] = r.reported;
  return d;
}

std::string evaluate_jsonl(const std::string& episodes_jsonl, const std::optional<std::string>& pool_corpus,
                           const std::function<std::string(const std::string&)>& predict,
                           const std::string& mode_name, std::size_t k, std::uint64_t seed,
                           const std::optional<std::string>& schema_path, bool transcript) {
  auto mode = icl::parse_eval_mode(mode_name);
  if (!mode) throw std::invalid_argument("unknown mode '" + mode_name + "'");
  const Schema schema = schema_or_builtin(schema_path);
  const auto episodes = icl::read_episodes(episodes_jsonl);
  icl::ExamplePool pool;
  if (pool_corpus) pool = icl::pool_from_corpus(read_corpus(*pool_corpus));
  CallbackBackend backend(predict, "python");
  icl::EvalConfig cfg;
  cfg.mode = *mode;
  cfg.k = k;
  cfg.seed = seed;
  cfg.workers = 1;
  cfg.retry.sleep = [](std::chrono::milliseconds) {};
  return icl::report_json(icl::evaluate(episodes, pool, schema, backend, cfg), transcript);
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_dialsynth, m) {
  m.doc() = "Synthetic dialogue generation and in-context DST evaluation";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<CredentialError>(m, "CredentialError", PyExc_RuntimeError);

  m.attr("__version__") = DIALSYNTH_VERSION;

  m.def("builtin_spec_names", &builtin_spec_names);
  m.def("compose", &compose_corpus, py::arg("spec") = "mw-1pct", py::arg("seed") = 0,
        py::arg("refinement") = "", py::arg("strategy") = "utterance_level", py::arg("backend") = "mock",
        py::arg("workers") = 1, py::arg("schema_path") = std::nullopt, py::arg("templates_path") = std::nullopt,
        "Compose a corpus and return it as JSONL text.");
  m.def(
      "stats", [](const std::string& corpus_jsonl) { return stats_json(corpus_stats(read_corpus(corpus_jsonl))); },
      py::arg("corpus"), "Corpus statistics as JSON text.");
  m.def(
      "validate_corpus", [](const std::string& corpus_jsonl) { return read_corpus(corpus_jsonl).samples.size(); },
      py::arg("corpus"), "Parse and validate a corpus; returns its sample count.");
  m.def(
      "roundtrip_corpus", [](const std::string& corpus_jsonl) { return write_corpus(read_corpus(corpus_jsonl)); },
      py::arg("corpus"));
  m.def("apportion", &apportion, py::arg("total"), py::arg("percents"));
  m.def("estimate_cost", &cost, py::arg("count"), py::arg("row") = "mw-1pct", py::arg("overhead") = kDefaultOverhead,
        py::arg("price_in") = Prices{}.input_per_1k, py::arg("price_out") = Prices{}.output_per_1k);
  m.def("export_transitions", &export_transitions);
  m.def(
      "is_valid_transition",
      [](const std::string& sys, const std::string& user) {
        auto s = parse_system_intent(sys);
        auto u = parse_user_intent(user);
        if (!s || !u) throw std::invalid_argument("unknown intent");
        return is_valid_transition(*s, *u);
      },
      py::arg("system_intent"), py::arg("user_intent"));
  m.def(
      "export_schema",
      [](const std::optional<std::string>& path) { return write_schema(schema_or_builtin(path)); },
      py::arg("path") = std::nullopt);
  m.def("export_templates", [] { return write_template_bank(builtin_template_bank()); });
  m.def(
      "episodes_from_corpus",
      [](const std::string& corpus_jsonl) { return icl::write_episodes(icl::episodes_from_corpus(read_corpus(corpus_jsonl))); },
      py::arg("corpus"));
  m.def("evaluate", &evaluate_jsonl, py::arg("episodes"), py::arg("pool") = std::nullopt, py::arg("predict"),
        py::arg("mode") = "few_shot_retrieval", py::arg("k") = 10, py::arg("seed") = 0,
        py::arg("schema_path") = std::nullopt, py::arg("transcript") = false,
        "Evaluate episodes (JSONL) with `predict(prompt) -> completion`; returns the JGA report as JSON text.");
  m.def("tf_cosine", &icl::tf_cosine, py::arg("a"), py::arg("b"));
  m.def("run_cli", &run_cli, py::arg("args"), "Run the command-line tool in-process; returns (code, stdout, stderr).");
}
