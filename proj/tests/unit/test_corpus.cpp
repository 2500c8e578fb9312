#include <doctest.h>

#include <filesystem>
#include <map>
#include <numeric>

#include "dialsynth/corpus.hpp"
#include "dialsynth/errors.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/schema.hpp"
#include "json_util.hpp"

using namespace dialsynth;
using nlohmann::json;

namespace {

CompositionSpec small_spec(RefinementMode mode = RefinementMode::none) {
  CompositionSpec s;
  s.name = "small";
  s.targets = {{"hotel", 20}, {"train", 13}};
  s.seed = 99;
  s.refinement = mode;
  return s;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

TEST_CASE("apportion") {
  CHECK(apportion(111, {50, 15, 10, 10, 10, 5}) == std::vector<std::uint64_t>{55, 17, 11, 11, 11, 6});
  CHECK(apportion(0, {50, 50}) == std::vector<std::uint64_t>{0, 0});
  CHECK(apportion(3, {50, 50}) == std::vector<std::uint64_t>{2, 1});
  CHECK(apportion(1, {10, 90}) == std::vector<std::uint64_t>{0, 1});
  for (std::uint64_t n = 0; n < 300; ++n) {
    const auto a = apportion(n, {50, 15, 10, 10, 10, 5});
    CHECK(std::accumulate(a.begin(), a.end(), std::uint64_t{0}) == n);
  }
  CHECK_THROWS_AS(apportion(5, {50, 40}), std::invalid_argument);
  const auto c = category_counts(105);
  CHECK(std::accumulate(c.begin(), c.end(), std::uint64_t{0}) == 105);
}

TEST_CASE("builtin specs") {
  const auto names = builtin_spec_names();
  CHECK(std::find(names.begin(), names.end(), "mw-1pct") != names.end());
  CHECK(builtin_spec("mw-1pct")->target_total() == 549);
  CHECK(builtin_spec("mw-5pct")->target_total() == 2748);
  CHECK(builtin_spec("mw-10pct")->target_total() == 5495);
  CHECK(builtin_spec("unique_all_5x")->copies == 5);
  CHECK_FALSE(builtin_spec("mw-50pct").has_value());
  for (const auto& n : names) CHECK(parse_spec(write_spec(*builtin_spec(n))) == *builtin_spec(n));
  CHECK_THROWS_AS(parse_spec(R"({"kind": "percentage"})"), ParseError);
}

TEST_CASE("compose follows the split and the category mixture") {
  const Corpus c = compose(builtin_schema(), small_spec());
  CHECK(c.samples.size() == 33);
  CHECK(c.manifest.domain_counts == std::map<std::string, std::uint64_t>{{"hotel", 20}, {"train", 13}});
  std::map<std::string, std::map<std::string, std::uint64_t>> per;
  for (const auto& s : c.samples) {
    ++per[s.domain][s.flow_category == FlowCategory::new_slot_values ? "new" : std::string(to_string(s.flow_category))];
    CHECK(sample_grounded(s));
    CHECK(apply(s.history, s.turn_delta) == s.full_state);
    CHECK(s.system_utterance == s.system_template);
  }
  CHECK(per["hotel"]["new"] == 10);
  CHECK(per["train"]["new"] == 7);
  CHECK(c.manifest.grounding_rate == 1.0);
  CHECK(c.manifest.backend == "none");
  CHECK(c.samples.front().id == "small-000000");
}

TEST_CASE("compose rejects unknown domains and missing backends") {
  CompositionSpec s = small_spec();
  s.targets = {{"spaceport", 2}};
  CHECK_THROWS_AS(compose(builtin_schema(), s), ValidationError);
  CHECK_THROWS(compose(builtin_schema(), small_spec(RefinementMode::full)));
}

TEST_CASE("refined composition records four calls per sample") {
  MockBackend mock;
  ComposeOptions opts;
  opts.backend = &mock;
  opts.workers = 3;
  const Corpus c = compose(builtin_schema(), small_spec(RefinementMode::full), opts);
  CHECK(c.manifest.backend == "mock");
  for (const auto& s : c.samples) {
    REQUIRE(s.provenance.refinement.has_value());
    CHECK(s.provenance.refinement->call_count() == 4);
    CHECK(sample_grounded(s));
  }
  const auto avg = measured_call_averages(c);
  REQUIRE(avg.has_value());
  CHECK((*avg)[0].input > 0);
}

TEST_CASE("failed refinements are replaced and counted") {
  std::atomic<int> n{0};
  CallbackBackend sometimes([&](const std::string& p) -> std::string {
    if (++n % 7 == 0) throw BackendError("flaky");
    return MockBackend().complete(p, {}).text;
  });
  ComposeOptions opts;
  opts.backend = &sometimes;
  opts.refiner.retry.max_attempts = 1;
  opts.refiner.retry.sleep = [](std::chrono::milliseconds) {};
  const Corpus c = compose(builtin_schema(), small_spec(RefinementMode::full), opts);
  CHECK(c.samples.size() == 33);
  CHECK(c.manifest.failures > 0);
  bool replaced = false;
  for (const auto& s : c.samples) replaced = replaced || s.provenance.replacement > 0;
  CHECK(replaced);
}

TEST_CASE("corpus JSONL round-trips and validates") {
  MockBackend mock;
  ComposeOptions opts;
  opts.backend = &mock;
  const Corpus c = compose(builtin_schema(), small_spec(RefinementMode::full), opts);
  const std::string text = write_corpus(c);
  CHECK(read_corpus(text) == c);
  CHECK(write_corpus(read_corpus(text)) == text);

  const auto lines = lines_of(text);
  const auto header = json::parse(lines[0]);
  CHECK(header["format"] == "dialsynth-corpus");
  CHECK(header["sample_count"] == 33);

  SUBCASE("truncated file") { CHECK_THROWS_AS(read_corpus(text.substr(0, text.size() - 5)), ParseError); }
  SUBCASE("missing header") {
    auto rest = lines;
    rest.erase(rest.begin());
    CHECK_THROWS_AS(read_corpus(join(rest)), ParseError);
  }
  SUBCASE("count mismatch") {
    auto fewer = lines;
    fewer.pop_back();
    CHECK_THROWS_AS(read_corpus(join(fewer)), ParseError);
  }
  SUBCASE("inconsistent state names the line") {
    auto bad = lines;
    auto j = json::parse(bad[3]);
    j["full_state"]["hotel-area"] = "atlantis";
    j["full_state"]["train-day"] = "someday";
    bad[3] = j.dump();
    try {
      read_corpus(join(bad));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
  }
  SUBCASE("file helpers") {
    const auto path = std::filesystem::temp_directory_path() / "dialsynth_corpus_test.jsonl";
    write_corpus(c, path);
    CHECK(read_corpus_file(path) == c);
    std::filesystem::remove(path);
  }
}

TEST_CASE("unique_all enumerates each flow once per copy") {
  const auto flows = enumerate_flows(builtin_schema());
  CHECK(flows.size() == 155);
  CompositionSpec s = *builtin_spec("unique_all");
  s.refinement = RefinementMode::none;
  const Corpus c = compose(builtin_schema(), s);
  CHECK(c.samples.size() == flows.size());
  std::map<std::string, int> seen;
  for (const auto& x : c.samples) ++seen[flow_key(x)];
  CHECK(seen.size() == flows.size());
  for (const auto& f : flows) CHECK(seen[f.key()] == 1);
}

TEST_CASE("stats") {
  const Corpus c = compose(builtin_schema(), small_spec());
  const CorpusStats st = corpus_stats(c);
  CHECK(st.sample_count == 33);
  CHECK(st.per_domain.at("hotel") == 20);
  CHECK(st.grounding_rate == 1.0);
  CHECK(st.mean_user_words > 0);
  std::uint64_t pairs = 0;
  for (auto& [_, n] : st.intent_pairs) pairs += n;
  CHECK(pairs == 33);
  CHECK(json::parse(stats_json(st))["sample_count"] == 33);
}

TEST_CASE("cost model") {
  CallAverages one{};
  one[0] = {1000, 1000};
  const CostReport r = estimate_cost(10, one, Prices{}, 2.0);
  CHECK(r.naive == doctest::Approx(10 * (0.001 + 0.002)));
  CHECK(r.reported == doctest::Approx(2 * r.naive));
  CHECK(builtin_call_averages("mw-5pct").has_value());
  CHECK_FALSE(builtin_call_averages("nope").has_value());
}
