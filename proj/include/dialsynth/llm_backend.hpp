#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace dialsynth {

struct GenerationParams {
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  std::chrono::milliseconds timeout{30000};
};

struct TokenUsage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct Completion {
  std::string text;
  TokenUsage usage;
};

/// A text-completion service. Implementations must be safe to call from
/// several threads at once.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Throws BackendError on transport or protocol failure.
  virtual Completion complete(const std::string& prompt, const GenerationParams& params) = 0;
  /// Short description recorded in manifests ("mock", "remote:gpt-3.5-turbo", ...).
  virtual std::string describe() const = 0;
};

/// Whitespace-delimited token count, used where a backend reports no usage.
std::uint64_t approximate_tokens(std::string_view text);

/// Lowercase hex SHA-256 of the prompt bytes; the key of scripted fixtures.
std::string prompt_hash(std::string_view prompt);

/// Offline identity backend. For refinement prompts it echoes the template
/// (or utterance) text inside the requested `{"<role>_paraphrased": ...}`
/// envelope; any other prompt gets "none".
class MockBackend final : public LlmBackend {
 public:
  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::string describe() const override { return "mock"; }
};

/// Replays a fixture document:
///   {"responses": {"<prompt sha256>": "text" | ["first", "second", ...]}}
/// A list is consumed in order per prompt, its last entry repeating.
/// Unknown prompts raise BackendError.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::string_view fixture_document, std::string label = "scripted");
  static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::string describe() const override { return label_; }

 private:
  std::string label_;
  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, std::size_t> cursor_;
  std::mutex mutex_;
};

/// Wraps another backend and records every prompt/response pair in the
/// scripted fixture format.
class RecordingBackend final : public LlmBackend {
 public:
  explicit RecordingBackend(LlmBackend& inner) : inner_(inner) {}

  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::string describe() const override { return inner_.describe(); }

  std::string fixture_document() const;

 private:
  LlmBackend& inner_;
  std::map<std::string, std::vector<std::string>> recorded_;
  mutable std::mutex mutex_;
};

/// Delegates to a function; handy for tests and language bindings.
class CallbackBackend final : public LlmBackend {
 public:
  using Fn = std::function<std::string(const std::string& prompt)>;
  explicit CallbackBackend(Fn fn, std::string label = "callback")
      : fn_(std::move(fn)), label_(std::move(label)) {}

  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::string describe() const override { return label_; }

 private:
  Fn fn_;
  std::string label_;
};

/// Token bucket over tokens per minute; 0 disables limiting.
class TokenRateLimiter {
 public:
  explicit TokenRateLimiter(std::uint64_t tokens_per_minute) : rate_(tokens_per_minute) {}
  void acquire(std::uint64_t tokens);

 private:
  std::uint64_t rate_;
  double available_ = -1;
  std::chrono::steady_clock::time_point last_{};
  std::mutex mutex_;
};

struct RemoteOptions {
  /// Base of an OpenAI-style API, e.g. "https://api.openai.com/v1".
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  /// Recorded in describe(); the request model comes from GenerationParams.
  std::string model;
  bool verbose = false;
  std::uint64_t tokens_per_minute = 0;
};

/// Chat-completion endpoint client: POST {base_url}/chat/completions.
class RemoteBackend final : public LlmBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  Completion complete(const std::string& prompt, const GenerationParams& params) override;
  std::string describe() const override;

 private:
  RemoteOptions options_;
  TokenRateLimiter limiter_;
};

struct BackendSelection {
  std::unique_ptr<LlmBackend> backend;
  /// Model named in "remote:<model>", empty otherwise.
  std::string model;
};

/// Parses "mock", "scripted:<fixture path>" or "remote:<model>". The remote
/// backend reads its key from the API_KEY environment variable and throws
/// CredentialError when it is unset.
BackendSelection make_backend(std::string_view spec, RemoteOptions remote = {});

}  // namespace dialsynth
