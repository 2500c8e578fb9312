#include <doctest.h>

#include <atomic>
#include <set>

#include "dialsynth/errors.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/refiner.hpp"

using namespace dialsynth;

namespace {

RefinerConfig quick(RefinementStrategy s) {
  RefinerConfig c;
  c.strategy = s;
  c.retry.sleep = [](std::chrono::milliseconds) {};
  return c;
}

const RefinementInput kInput{"hotel", "I would suggest the hotel with area north",
                             "Yes, the hotel with area north is fine"};

}  // namespace

TEST_CASE("modification prompt is verbatim") {
  const std::string expected =
      "Following is a template user response for a conversation between a hotel chatbot and a user. "
      "Paraphrase the template by making it more fluent, engaging, polite, and coherent. Also, correct "
      "grammatical mistakes. Reorder the sentences if necessary.\n"
      "Strictly generate the response in the form of a JSON object {'user_paraphrased': ''} with correct "
      "formatting (including curly brackets). Do not return anything else apart from the JSON object.\n"
      "'user_template': 'The hotel area should be north'";
  CHECK(build_modification_prompt("user", "hotel", "The hotel area should be north") == expected);
  CHECK(build_modification_prompt(Side::user, "hotel", "The hotel area should be north") == expected);
  const auto sys = build_modification_prompt(Side::system, "train", "When ?");
  CHECK(sys.find("chatbot") != std::string::npos);
  CHECK(sys.find("train") != std::string::npos);
  CHECK(sys.find("'system_paraphrased'") != std::string::npos);
  CHECK_THROWS_AS(build_modification_prompt("robot", "train", "x"), std::invalid_argument);
  CHECK(build_modification_prompt(Side::system, "train", "a\nb").find("'system_template': 'a b'") !=
        std::string::npos);
}

TEST_CASE("paraphrase prompt set") {
  const auto& p = paraphrase_prompts();
  CHECK(p[0] == "Rephrase the sentences while retaining the original meaning.");
  CHECK(p[1] == "Use synonyms or related words to express the sentences with the same meaning.");
  CHECK(p[2] == "Use conversational language and paraphrase the following sentences.");
  CHECK(p[3] ==
        "Generate a crisp and to the point single sentence from the given sentences using conversational "
        "language.");
  std::set<unsigned> seen;
  Rng rng(1);
  for (int i = 0; i < 400; ++i) {
    const auto [idx, text] = select_paraphrase_prompt(rng);
    CHECK(idx < 4);
    CHECK(text == p[idx]);
    seen.insert(idx);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("multi-step and dialogue prompts") {
  const auto m = build_multi_step_user_prompt("hotel", "Might I suggest a hotel up north?", "Yes that is fine");
  CHECK(m.find("'system_response': 'Might I suggest a hotel up north?'") != std::string::npos);
  CHECK(m.find("'user_paraphrased'") != std::string::npos);
  const auto d = build_dialogue_prompt("hotel", "A", "B");
  CHECK(d.find("'system_paraphrased'") != std::string::npos);
  CHECK(d.find("'user_paraphrased'") != std::string::npos);
}

TEST_CASE("response parsing") {
  CHECK(parse_refinement_response(R"({"user_paraphrased": "Sure thing"})", Side::user) == "Sure thing");
  CHECK(parse_refinement_response("Here you go: {'user_paraphrased': 'It's great'} thanks", "user") ==
        "It's great");
  CHECK(parse_refinement_response(wrap_response(Side::system, "a \"quoted\" word"), Side::system) ==
        "a \"quoted\" word");
  auto kind_of = [](std::string_view raw) {
    try {
      parse_refinement_response(raw, Side::user);
    } catch (const ResponseParseError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  CHECK(kind_of("no json here") == static_cast<int>(ResponseParseError::Kind::no_object));
  CHECK(kind_of(R"({"system_paraphrased": "x"})") == static_cast<int>(ResponseParseError::Kind::key_missing));
  CHECK(kind_of(R"({"user_paraphrased": "  "})") == static_cast<int>(ResponseParseError::Kind::empty_value));
}

TEST_CASE("call accounting per strategy") {
  MockBackend mock;
  Rng rng(3);
  auto u = refine_sample(kInput, mock, rng, quick(RefinementStrategy::utterance_level));
  CHECK(u.call_count() == 4);
  CHECK(u.system.calls.size() == 2);
  CHECK(u.user.calls.size() == 2);
  CHECK(u.system.calls[0].kind == CallKind::modify);
  CHECK(u.system.calls[1].kind == CallKind::paraphrase);
  CHECK(u.system.paraphrased_text == kInput.system_template);
  CHECK(u.user.paraphrased_text == kInput.user_template);
  CHECK(u.system.template_text == kInput.system_template);
  CHECK(u.system.paraphrase_prompt_index < 4);
  CHECK(u.system.usage().input_tokens > 0);

  auto m = refine_sample(kInput, mock, rng, quick(RefinementStrategy::multi_step));
  CHECK(m.call_count() == 4);
  auto d = refine_sample(kInput, mock, rng, quick(RefinementStrategy::dialogue_level));
  CHECK(d.call_count() == 3);
  CHECK(d.system.calls.size() == 2);
  CHECK(d.user.calls.size() == 1);
}

TEST_CASE("multi-step passes the modified system response on") {
  std::string user_prompt;
  CallbackBackend cb([&](const std::string& p) {
    if (p.find("'system_response'") != std::string::npos) user_prompt = p;
    if (p.find("'system_paraphrased'") != std::string::npos) return std::string(R"({"system_paraphrased": "SYS!"})");
    return std::string(R"({"user_paraphrased": "USER!"})");
  });
  Rng rng(1);
  auto r = refine_sample(kInput, cb, rng, quick(RefinementStrategy::multi_step));
  CHECK(user_prompt.find("'system_response': 'SYS!'") != std::string::npos);
  CHECK(r.system.modified_text == "SYS!");
  CHECK(r.user.modified_text == "USER!");
}

TEST_CASE("retries with exponential backoff, then gives up") {
  std::atomic<int> n{0};
  CallbackBackend flaky([&](const std::string& p) {
    if (++n % 2 == 1) return std::string("not json");
    MockBackend mock;
    return mock.complete(p, {}).text;
  });
  std::vector<std::chrono::milliseconds> sleeps;
  RefinerConfig cfg = quick(RefinementStrategy::utterance_level);
  cfg.retry.sleep = [&](std::chrono::milliseconds ms) { sleeps.push_back(ms); };
  Rng rng(5);
  auto r = refine_sample(kInput, flaky, rng, cfg);
  CHECK(r.call_count() == 4);
  CHECK(r.system.attempts() == 4);
  CHECK(r.system.calls[0].attempts == 2);
  REQUIRE(sleeps.size() == 4);
  CHECK(sleeps[0] == std::chrono::milliseconds(1000));

  CallbackBackend broken([](const std::string&) -> std::string { throw BackendError("down"); });
  sleeps.clear();
  CHECK_THROWS_AS(refine_sample(kInput, broken, rng, cfg), RefinementFailed);
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                          std::chrono::milliseconds(2000)});
}

TEST_CASE("refinement is deterministic for a seed") {
  MockBackend mock;
  Rng a(42), b(42);
  CHECK(refine_sample(kInput, mock, a, quick(RefinementStrategy::utterance_level)) ==
        refine_sample(kInput, mock, b, quick(RefinementStrategy::utterance_level)));
  CHECK(parse_refinement_strategy("dialogue_level") == RefinementStrategy::dialogue_level);
  CHECK_FALSE(parse_refinement_strategy("sentence").has_value());
}
