#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialsynth/dialogue_model.hpp"
#include "dialsynth/errors.hpp"
#include "dialsynth/llm_backend.hpp"
#include "dialsynth/rng.hpp"

namespace dialsynth {

enum class RefinementStrategy { utterance_level, multi_step, dialogue_level };

std::string_view to_string(RefinementStrategy s);
std::optional<RefinementStrategy> parse_refinement_strategy(std::string_view name);

enum class CallKind { modify, paraphrase };
std::string_view to_string(CallKind k);

struct CallRecord {
  CallKind kind = CallKind::modify;
  TokenUsage usage;
  unsigned attempts = 1;

  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

struct RefinementRecord {
  Side role = Side::system;
  std::string template_text;
  std::string modified_text;
  std::string paraphrased_text;
  unsigned paraphrase_prompt_index = 0;
  /// Calls attributed to this role. Under dialogue_level the shared
  /// modification call is attributed to the system record.
  std::vector<CallRecord> calls;

  unsigned attempts() const;
  TokenUsage usage() const;
  friend bool operator==(const RefinementRecord&, const RefinementRecord&) = default;
};

struct RefinedPair {
  RefinementRecord system;
  RefinementRecord user;

  std::size_t call_count() const { return system.calls.size() + user.calls.size(); }
  friend bool operator==(const RefinedPair&, const RefinedPair&) = default;
};

struct RetryPolicy {
  unsigned max_attempts = 3;
  std::chrono::milliseconds base_backoff{1000};
  /// Replaces std::this_thread::sleep_for; tests inject a no-op.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct RefinerConfig {
  RefinementStrategy strategy = RefinementStrategy::utterance_level;
  GenerationParams params;
  RetryPolicy retry;
};

class ResponseParseError : public Error {
 public:
  enum class Kind { no_object, key_missing, empty_value };
  ResponseParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Retry budget exhausted for one call of a sample.
class RefinementFailed : public Error {
 public:
  using Error::Error;
};

/// The four paraphrase instructions, verbatim.
const std::array<std::string, 4>& paraphrase_prompts();

/// Uniform over the four paraphrase instructions.
std::pair<unsigned, std::string> select_paraphrase_prompt(Rng& rng);

/// Throws std::invalid_argument unless `role` is "system" or "user".
std::string build_modification_prompt(std::string_view role, std::string_view domain,
                                      std::string_view template_text);
std::string build_modification_prompt(Side role, std::string_view domain,
                                      std::string_view template_text);

/// User modification prompt that also shows the already modified system turn.
std::string build_multi_step_user_prompt(std::string_view domain, std::string_view modified_system,
                                         std::string_view user_template);

/// One prompt asking for both `system_paraphrased` and `user_paraphrased`.
std::string build_dialogue_prompt(std::string_view domain, std::string_view system_template,
                                  std::string_view user_template);

std::string build_paraphrase_prompt(Side role, std::string_view instruction, std::string_view text);

/// Value of `<role>_paraphrased` in the first object literal found in `raw`.
/// Throws ResponseParseError.
std::string parse_refinement_response(std::string_view raw, std::string_view role);
std::string parse_refinement_response(std::string_view raw, Side role);

/// `{"<role>_paraphrased": text}`.
std::string wrap_response(Side role, std::string_view text);

struct RefinementInput {
  std::string domain;
  std::string system_template;
  std::string user_template;
};

/// Modification then paraphrase for both roles. Throws RefinementFailed when
/// any call exhausts the retry policy.
RefinedPair refine_sample(const RefinementInput& input, LlmBackend& backend, Rng& rng,
                          const RefinerConfig& config = {});

}  // namespace dialsynth
