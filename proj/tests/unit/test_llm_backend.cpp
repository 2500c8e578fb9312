#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dialsynth/errors.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/refiner.hpp"
#include "fake_server.hpp"
#include "json_util.hpp"

using namespace dialsynth;
using nlohmann::json;

TEST_CASE("prompt_hash is SHA-256 hex") {
  CHECK(prompt_hash("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(prompt_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("approximate_tokens counts words") {
  CHECK(approximate_tokens("") == 0);
  CHECK(approximate_tokens("  one two\tthree\n") == 3);
}

TEST_CASE("mock backend echoes the template inside the envelope") {
  MockBackend mock;
  const auto prompt = build_modification_prompt(Side::user, "hotel", "The hotel area should be north");
  const Completion c = mock.complete(prompt, {});
  CHECK(parse_refinement_response(c.text, Side::user) == "The hotel area should be north");
  CHECK(c.usage.input_tokens == approximate_tokens(prompt));
  CHECK(c.usage.output_tokens > 0);
  CHECK(mock.complete("what is the state?", {}).text == "none");

  const auto para = build_paraphrase_prompt(Side::system, paraphrase_prompts()[0], "Booked hotel for 2 people");
  CHECK(parse_refinement_response(mock.complete(para, {}).text, Side::system) == "Booked hotel for 2 people");

  const auto both = build_dialogue_prompt("taxi", "Where to ?", "I need a taxi to the station");
  const auto reply = mock.complete(both, {}).text;
  CHECK(parse_refinement_response(reply, Side::system) == "Where to ?");
  CHECK(parse_refinement_response(reply, Side::user) == "I need a taxi to the station");
}

TEST_CASE("scripted backend replays by prompt hash") {
  json fixture;
  fixture["responses"][prompt_hash("p1")] = "r1";
  fixture["responses"][prompt_hash("p2")] = json::array({"a", "b"});
  ScriptedBackend s(fixture.dump());
  CHECK(s.complete("p1", {}).text == "r1");
  CHECK(s.complete("p1", {}).text == "r1");
  CHECK(s.complete("p2", {}).text == "a");
  CHECK(s.complete("p2", {}).text == "b");
  CHECK(s.complete("p2", {}).text == "b");
  CHECK_THROWS_AS(s.complete("p3", {}), BackendError);
  CHECK_THROWS_AS(ScriptedBackend(R"({"responses": {"x": 3}})"), ParseError);
  CHECK_THROWS_AS(ScriptedBackend("[]"), ParseError);
}

TEST_CASE("recording backend produces a replayable fixture") {
  MockBackend mock;
  RecordingBackend rec(mock);
  const auto p = build_modification_prompt(Side::system, "train", "When do you want to leave ?");
  const auto first = rec.complete(p, {}).text;
  rec.complete("other", {});
  ScriptedBackend replay(rec.fixture_document());
  CHECK(replay.complete(p, {}).text == first);
  CHECK(replay.complete("other", {}).text == "none");
  CHECK(rec.describe() == "mock");
}

TEST_CASE("callback backend") {
  CallbackBackend cb([](const std::string& p) { return "echo:" + p; });
  const auto c = cb.complete("x y", {});
  CHECK(c.text == "echo:x y");
  CHECK(c.usage.input_tokens == 2);
}

TEST_CASE("make_backend parses specs and checks credentials") {
  CHECK(make_backend("mock").backend->describe() == "mock");
  CHECK_THROWS_AS(make_backend("magic"), std::invalid_argument);
  CHECK_THROWS_AS(make_backend("remote:"), std::invalid_argument);
  CHECK_THROWS(make_backend("scripted:/nonexistent/fixture.json"));
  ::unsetenv("API_KEY");
  CHECK_THROWS_AS(make_backend("remote:gpt-3.5-turbo"), CredentialError);
  ::setenv("API_KEY", "sk-test", 1);
  auto sel = make_backend("remote:gpt-3.5-turbo");
  CHECK(sel.model == "gpt-3.5-turbo");
  CHECK(sel.backend->describe() == "remote:gpt-3.5-turbo");
  ::unsetenv("API_KEY");
}

TEST_CASE("remote backend speaks the chat-completion protocol") {
  testing::FakeServer fake;
  std::atomic<int> calls{0};
  std::string seen_auth, seen_model, seen_content;
  double seen_temperature = -1;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    seen_auth = req.get_header_value("Authorization");
    const auto body = json::parse(req.body);
    seen_model = body["model"];
    seen_temperature = body["temperature"];
    seen_content = body["messages"][0]["content"];
    json reply;
    reply["choices"] = json::array({{{"message", {{"role", "assistant"}, {"content", "hello back"}}}}});
    reply["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 3}};
    res.set_content(reply.dump(), "application/json");
  });
  fake.server().Post("/broken/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("overloaded", "text/plain");
  });
  fake.server().Post("/garbled/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  fake.start();

  RemoteOptions opts;
  opts.base_url = fake.base_url();
  opts.api_key = "sk-secret";
  RemoteBackend remote(opts);
  GenerationParams params;
  params.model = "gpt-test";
  params.temperature = 0.25;
  const Completion c = remote.complete("hi there", params);
  CHECK(c.text == "hello back");
  CHECK(c.usage == TokenUsage{12, 3});
  CHECK(seen_auth == "Bearer sk-secret");
  CHECK(seen_model == "gpt-test");
  CHECK(seen_temperature == doctest::Approx(0.25));
  CHECK(seen_content == "hi there");
  CHECK(calls == 1);

  opts.base_url = fake.base_url("/broken");
  CHECK_THROWS_AS(RemoteBackend(opts).complete("x", params), BackendError);
  opts.base_url = fake.base_url("/garbled");
  CHECK_THROWS_AS(RemoteBackend(opts).complete("x", params), BackendError);
  fake.stop();
  opts.base_url = fake.base_url();
  params.timeout = std::chrono::milliseconds(500);
  CHECK_THROWS_AS(RemoteBackend(opts).complete("x", params), BackendError);
  opts.base_url = "ftp://example.org";
  CHECK_THROWS_AS(RemoteBackend{opts}, std::invalid_argument);
}

TEST_CASE("rate limiter admits a full bucket immediately") {
  TokenRateLimiter off(0);
  off.acquire(1'000'000);
  TokenRateLimiter limiter(600'000);
  const auto start = std::chrono::steady_clock::now();
  limiter.acquire(1000);
  limiter.acquire(1000);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::milliseconds(200));
}
