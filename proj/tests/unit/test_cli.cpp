#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dialsynth/cli.hpp"
#include "dialsynth/corpus.hpp"
#include "dialsynth/icl/episodes.hpp"
#include "json_util.hpp"

using namespace dialsynth;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dialsynth_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  CHECK(run({"compose", "--strategy", "sentence_level"}).code == cli::kUsageError);
  CHECK(run({"compose", "--backend", "magic"}).code == cli::kUsageError);
  CHECK(run({"cost", "--averages", "nope"}).code == cli::kUsageError);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("compose") != std::string::npos);
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("missing inputs exit with 3") {
  CHECK(run({"eval"}).code == cli::kMissingInput);
  CHECK(run({"eval", "--episodes", "/nonexistent.jsonl"}).code == cli::kMissingInput);
  CHECK(run({"stats", "--corpus", "/nonexistent.jsonl"}).code == cli::kMissingInput);
  CHECK(run({"refine"}).code == cli::kMissingInput);
  CHECK(run({"generate", "--schema", "/nonexistent/schema.json"}).code == cli::kMissingInput);
}

TEST_CASE("credential errors exit with 4") {
  ::unsetenv("API_KEY");
  CHECK(run({"compose", "--backend", "remote:gpt-3.5-turbo"}).code == cli::kCredentialError);
}

TEST_CASE("generate, refine, stats and eval end to end") {
  TempDir dir;
  const auto gen = run({"generate", "--spec", "mw-1pct", "--seed", "3", "-o", dir / "t.jsonl"});
  REQUIRE(gen.code == 0);
  const Corpus t = read_corpus_file(dir / "t.jsonl");
  CHECK(t.samples.size() == 549);
  CHECK(t.manifest.spec.refinement == RefinementMode::none);

  const auto ref = run({"refine", "--corpus", dir / "t.jsonl", "--workers", "2", "-o", dir / "r.jsonl",
                        "--record-fixture", dir / "fixture.json"});
  REQUIRE(ref.code == 0);
  const Corpus r = read_corpus_file(dir / "r.jsonl");
  CHECK(r.samples.size() == 549);
  CHECK(r.samples[0].provenance.refinement.has_value());

  const auto replay = run({"refine", "--corpus", dir / "t.jsonl", "--backend", "scripted:" + (dir / "fixture.json"),
                           "-o", dir / "r2.jsonl"});
  REQUIRE(replay.code == 0);
  CHECK(slurp(dir / "r2.jsonl").substr(slurp(dir / "r2.jsonl").find('\n')) ==
        slurp(dir / "r.jsonl").substr(slurp(dir / "r.jsonl").find('\n')));

  const auto st = run({"stats", "--corpus", dir / "r.jsonl"});
  REQUIRE(st.code == 0);
  CHECK(json::parse(st.out)["sample_count"] == 549);

  {
    Corpus small = t;
    small.samples.resize(10);
    std::ofstream(dir / "eps.jsonl") << icl::write_episodes(icl::episodes_from_corpus(small));
  }
  const auto ev = run({"eval", "--episodes", dir / "eps.jsonl", "--pool", dir / "t.jsonl", "-k", "2",
                       "--transcript", "--report", dir / "report.json"});
  REQUIRE(ev.code == 0);
  const auto report = json::parse(slurp(dir / "report.json"));
  CHECK(report["turns"] == 10);
  CHECK(report["transcript"][0]["exemplars"].size() == 2);

  CHECK(run({"eval", "--episodes", dir / "eps.jsonl", "--mode", "few_shot_random"}).code ==
        cli::kMissingInput);
  CHECK(run({"eval", "--episodes", dir / "eps.jsonl", "--mode", "zero_shot"}).code == 0);

  std::ofstream(dir / "broken.jsonl") << "{\"format\": \"nope\"}\n";
  CHECK(run({"stats", "--corpus", dir / "broken.jsonl"}).code == cli::kInvalidInput);
}

TEST_CASE("compose is byte-identical across runs") {
  TempDir dir;
  REQUIRE(run({"compose", "--spec", "mw-1pct", "--seed", "9", "-o", dir / "a.jsonl"}).code == 0);
  REQUIRE(run({"compose", "--spec", "mw-1pct", "--seed", "9", "--workers", "3", "-o", dir / "b.jsonl"}).code == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  REQUIRE(run({"compose", "--spec", "mw-1pct", "--seed", "10", "-o", dir / "c.jsonl"}).code == 0);
  CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));
}

TEST_CASE("cost and exports") {
  const auto c = run({"cost", "--spec", "mw-10pct"});
  REQUIRE(c.code == 0);
  const auto j = json::parse(c.out);
  CHECK(j["sample_count"] == 5495);
  CHECK(j["estimated_usd"].get<double>() == doctest::Approx(3.78).epsilon(0.02));
  const auto n = run({"cost", "--count", "100", "--overhead", "1", "--price-in", "0", "--price-out", "0"});
  CHECK(json::parse(n.out)["estimated_usd"] == 0.0);
  CHECK(json::parse(run({"export-schema"}).out)["domains"].size() == 5);
  CHECK(json::parse(run({"export-templates"}).out).size() > 44);
  CHECK(json::parse(run({"export-transitions"}).out).contains("transitions"));
}
