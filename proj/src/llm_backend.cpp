#include "dialsynth/llm_backend.hpp"

#include <openssl/sha.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "dialsynth/errors.hpp"
#include "http_client.hpp"
#include "json_util.hpp"

namespace dialsynth {

using jsonutil::json;

std::uint64_t approximate_tokens(std::string_view text) {
  std::uint64_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::string prompt_hash(std::string_view prompt) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(prompt.data()), prompt.size(), digest);
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned char b : digest) out << std::setw(2) << static_cast<int>(b);
  return out.str();
}

namespace {

// Value of the last line "'<key>': '<text>'" in the prompt.
std::string quoted_line_value(const std::string& prompt, const std::string& key) {
  const std::string prefix = "'" + key + "': '";
  std::string found;
  std::istringstream lines(prompt);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind(prefix, 0) != 0) continue;
    std::string rest = line.substr(prefix.size());
    if (!rest.empty() && rest.back() == '\'') rest.pop_back();
    found = rest;
  }
  return found;
}

}  // namespace

Completion MockBackend::complete(const std::string& prompt, const GenerationParams&) {
  json out = json::object();
  for (const char* role : {"system", "user"}) {
    if (prompt.find("'" + std::string(role) + "_paraphrased'") == std::string::npos) continue;
    std::string text = quoted_line_value(prompt, std::string(role) + "_template");
    if (text.empty()) text = quoted_line_value(prompt, std::string(role) + "_utterance");
    out[std::string(role) + "_paraphrased"] = text;
  }
  Completion c;
  c.text = out.empty() ? "none" : out.dump();
  c.usage = {approximate_tokens(prompt), approximate_tokens(c.text)};
  return c;
}

ScriptedBackend::ScriptedBackend(std::string_view fixture_document, std::string label)
    : label_(std::move(label)) {
  const json root = jsonutil::parse(fixture_document, "$");
  jsonutil::require_object(root, "$");
  const json& responses = jsonutil::field(root, "$", "responses");
  jsonutil::require_object(responses, "$.responses");
  for (const auto& [hash, value] : responses.items()) {
    const std::string path = "$.responses." + hash;
    std::vector<std::string> list;
    if (value.is_string()) {
      list.push_back(value.get<std::string>());
    } else if (value.is_array() && !value.empty()) {
      for (const auto& v : value) {
        if (!v.is_string()) throw ParseError(path, "responses must be strings");
        list.push_back(v.get<std::string>());
      }
    } else {
      throw ParseError(path, "expected a string or a non-empty list of strings");
    }
    responses_[hash] = std::move(list);
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read fixture " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return std::make_unique<ScriptedBackend>(buf.str(), "scripted:" + path);
}

Completion ScriptedBackend::complete(const std::string& prompt, const GenerationParams&) {
  const std::string hash = prompt_hash(prompt);
  std::lock_guard lock(mutex_);
  auto it = responses_.find(hash);
  if (it == responses_.end()) throw BackendError("scripted fixture has no response for prompt " + hash);
  std::size_t& pos = cursor_[hash];
  const std::string& text = it->second[std::min(pos, it->second.size() - 1)];
  ++pos;
  return {text, {approximate_tokens(prompt), approximate_tokens(text)}};
}

Completion RecordingBackend::complete(const std::string& prompt, const GenerationParams& params) {
  Completion c = inner_.complete(prompt, params);
  std::lock_guard lock(mutex_);
  recorded_[prompt_hash(prompt)].push_back(c.text);
  return c;
}

std::string RecordingBackend::fixture_document() const {
  std::lock_guard lock(mutex_);
  json root;
  root["responses"] = json::object();
  for (const auto& [hash, list] : recorded_) {
    if (list.size() == 1)
      root["responses"][hash] = list.front();
    else
      root["responses"][hash] = list;
  }
  return root.dump(2) + "\n";
}

Completion CallbackBackend::complete(const std::string& prompt, const GenerationParams&) {
  std::string text = fn_(prompt);
  TokenUsage usage{approximate_tokens(prompt), approximate_tokens(text)};
  return {std::move(text), usage};
}

void TokenRateLimiter::acquire(std::uint64_t tokens) {
  if (rate_ == 0) return;
  std::unique_lock lock(mutex_);
  const double per_second = static_cast<double>(rate_) / 60.0;
  const double want = std::min<double>(static_cast<double>(tokens), static_cast<double>(rate_));
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    if (available_ < 0) {
      available_ = static_cast<double>(rate_);
    } else {
      const double elapsed = std::chrono::duration<double>(now - last_).count();
      available_ = std::min<double>(static_cast<double>(rate_), available_ + elapsed * per_second);
    }
    last_ = now;
    if (available_ >= want) {
      available_ -= want;
      return;
    }
    const double wait = (want - available_) / per_second;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

RemoteBackend::RemoteBackend(RemoteOptions options)
    : options_(std::move(options)), limiter_(options_.tokens_per_minute) {
  http::parse_url(options_.base_url);
}

std::string RemoteBackend::describe() const {
  return "remote:" + (options_.model.empty() ? options_.base_url : options_.model);
}

Completion RemoteBackend::complete(const std::string& prompt, const GenerationParams& params) {
  json body;
  body["model"] = params.model;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = params.temperature;
  const std::string payload = body.dump();
  limiter_.acquire(approximate_tokens(prompt) * 2);
  if (options_.verbose)
    std::cerr << "[remote] POST " << options_.base_url << "/chat/completions"
              << " (Authorization: Bearer ***) " << payload << "\n";
  const auto res = http::post_json(options_.base_url, "/chat/completions", payload,
                                   {{"Authorization", "Bearer " + options_.api_key}},
                                   params.timeout);
  if (options_.verbose) std::cerr << "[remote] " << res.status << " " << res.body << "\n";
  if (res.status != 200)
    throw BackendError("chat completion returned HTTP " + std::to_string(res.status) + ": " +
                       res.body.substr(0, 200));
  json reply;
  try {
    reply = json::parse(res.body);
    Completion c;
    c.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    if (reply.contains("usage")) {
      c.usage.input_tokens = reply["usage"].value("prompt_tokens", std::uint64_t{0});
      c.usage.output_tokens = reply["usage"].value("completion_tokens", std::uint64_t{0});
    } else {
      c.usage = {approximate_tokens(prompt), approximate_tokens(c.text)};
    }
    return c;
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected chat completion body: ") + e.what());
  }
}

BackendSelection make_backend(std::string_view spec, RemoteOptions remote) {
  if (spec == "mock") return {std::make_unique<MockBackend>(), ""};
  if (spec.rfind("scripted:", 0) == 0) {
    const std::string path(spec.substr(9));
    return {ScriptedBackend::from_file(path), ""};
  }
  if (spec.rfind("remote:", 0) == 0) {
    std::string model(spec.substr(7));
    if (model.empty()) throw std::invalid_argument("remote backend needs a model: remote:<model>");
    if (remote.api_key.empty()) {
      const char* key = std::getenv("API_KEY");
      if (!key || !*key) throw CredentialError("remote backend requires the API_KEY environment variable");
      remote.api_key = key;
    }
    remote.model = model;
    return {std::make_unique<RemoteBackend>(std::move(remote)), std::move(model)};
  }
  throw std::invalid_argument("unknown backend '" + std::string(spec) +
                              "' (expected mock, scripted:<fixture>, remote:<model>)");
}

}  // namespace dialsynth
