#include "dialsynth/refiner.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <thread>

#include "json_util.hpp"

namespace dialsynth {

using jsonutil::json;

std::string_view to_string(RefinementStrategy s) {
  switch (s) {
    case RefinementStrategy::utterance_level: return "utterance_level";
    case RefinementStrategy::multi_step: return "multi_step";
    case RefinementStrategy::dialogue_level: return "dialogue_level";
  }
  return "?";
}

std::optional<RefinementStrategy> parse_refinement_strategy(std::string_view name) {
  for (auto s : {RefinementStrategy::utterance_level, RefinementStrategy::multi_step,
                 RefinementStrategy::dialogue_level})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

std::string_view to_string(CallKind k) { return k == CallKind::modify ? "modify" : "paraphrase"; }

unsigned RefinementRecord::attempts() const {
  unsigned n = 0;
  for (const auto& c : calls) n += c.attempts;
  return n;
}

TokenUsage RefinementRecord::usage() const {
  TokenUsage u;
  for (const auto& c : calls) u += c.usage;
  return u;
}

const std::array<std::string, 4>& paraphrase_prompts() {
  static const std::array<std::string, 4> prompts = {
      "Rephrase the sentences while retaining the original meaning.",
      "Use synonyms or related words to express the sentences with the same meaning.",
      "Use conversational language and paraphrase the following sentences.",
      "Generate a crisp and to the point single sentence from the given sentences using "
      "conversational language.",
  };
  return prompts;
}

std::pair<unsigned, std::string> select_paraphrase_prompt(Rng& rng) {
  const auto index = static_cast<unsigned>(rng.uniform(paraphrase_prompts().size()));
  return {index, paraphrase_prompts()[index]};
}

namespace {

std::string flat(std::string_view text) {
  std::string out(text);
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return out;
}

std::string json_instruction(std::string_view keys) {
  return "Strictly generate the response in the form of a JSON object {" + std::string(keys) +
         "} with correct formatting (including curly brackets). Do not return anything else apart "
         "from the JSON object.";
}

std::string role_key(std::string_view role) { return "'" + std::string(role) + "_paraphrased': ''"; }

std::string modification_head(std::string_view role, std::string_view domain) {
  return "Following is a template " + std::string(role) +
         " response for a conversation between a " + std::string(domain) +
         " chatbot and a user. Paraphrase the template by making it more fluent, engaging, polite, "
         "and coherent. Also, correct grammatical mistakes. Reorder the sentences if necessary.\n" +
         json_instruction(role_key(role)) + "\n";
}

void check_role(std::string_view role) {
  if (role != "system" && role != "user")
    throw std::invalid_argument("role must be 'system' or 'user', got '" + std::string(role) + "'");
}

// Flat object with single- or double-quoted keys and string values, as
// models sometimes return Python-style dicts.
std::optional<std::map<std::string, std::string>> lenient_object(std::string_view s) {
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  auto quoted = [&]() -> std::optional<std::string> {
    skip();
    if (i >= s.size() || (s[i] != '\'' && s[i] != '"')) return std::nullopt;
    const char q = s[i++];
    std::string out;
    while (i < s.size()) {
      if (s[i] == '\\' && i + 1 < s.size()) {
        out += s[i + 1];
        i += 2;
        continue;
      }
      if (s[i] == q) {
        // A quote only closes the string when followed by a delimiter.
        std::size_t j = i + 1;
        while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j >= s.size() || s[j] == ',' || s[j] == '}' || s[j] == ':') {
          i = i + 1;
          return out;
        }
      }
      out += s[i++];
    }
    return std::nullopt;
  };
  skip();
  if (i >= s.size() || s[i] != '{') return std::nullopt;
  ++i;
  std::map<std::string, std::string> out;
  skip();
  if (i < s.size() && s[i] == '}') return out;
  for (;;) {
    auto key = quoted();
    if (!key) return std::nullopt;
    skip();
    if (i >= s.size() || s[i] != ':') return std::nullopt;
    ++i;
    auto value = quoted();
    if (!value) return std::nullopt;
    out[*key] = *value;
    skip();
    if (i < s.size() && s[i] == ',') {
      ++i;
      continue;
    }
    if (i < s.size() && s[i] == '}') return out;
    return std::nullopt;
  }
}

}  // namespace

std::string build_modification_prompt(std::string_view role, std::string_view domain,
                                      std::string_view template_text) {
  check_role(role);
  return modification_head(role, domain) + "'" + std::string(role) + "_template': '" +
         flat(template_text) + "'";
}

std::string build_modification_prompt(Side role, std::string_view domain,
                                      std::string_view template_text) {
  return build_modification_prompt(to_string(role), domain, template_text);
}

std::string build_multi_step_user_prompt(std::string_view domain, std::string_view modified_system,
                                         std::string_view user_template) {
  return modification_head("user", domain) + "'system_response': '" + flat(modified_system) +
         "'\n'user_template': '" + flat(user_template) + "'";
}

std::string build_dialogue_prompt(std::string_view domain, std::string_view system_template,
                                  std::string_view user_template) {
  return "Following is a template exchange of a system response and a user response for a "
         "conversation between a " +
         std::string(domain) +
         " chatbot and a user. Paraphrase both templates by making them more fluent, engaging, "
         "polite, and coherent. Also, correct grammatical mistakes. Reorder the sentences if "
         "necessary.\n" +
         json_instruction(role_key("system") + ", " + role_key("user")) + "\n'system_template': '" +
         flat(system_template) + "'\n'user_template': '" + flat(user_template) + "'";
}

std::string build_paraphrase_prompt(Side role, std::string_view instruction, std::string_view text) {
  const std::string r(to_string(role));
  return std::string(instruction) + "\n" + json_instruction(role_key(r)) + "\n'" + r +
         "_utterance': '" + flat(text) + "'";
}

std::string parse_refinement_response(std::string_view raw, std::string_view role) {
  const std::string key = std::string(role) + "_paraphrased";
  bool saw_object = false;
  auto extract = [&](const std::map<std::string, std::string>& obj) -> std::optional<std::string> {
    auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    return it->second;
  };
  std::optional<std::string> value;
  bool non_string = false;
  for (std::size_t open = raw.find('{'); open != std::string_view::npos && !value;
       open = raw.find('{', open + 1)) {
    for (std::size_t close = raw.find('}', open); close != std::string_view::npos;
         close = raw.find('}', close + 1)) {
      const std::string_view candidate = raw.substr(open, close - open + 1);
      if (json::accept(candidate)) {
        const json obj = json::parse(candidate);
        if (!obj.is_object()) continue;
        saw_object = true;
        auto it = obj.find(key);
        if (it != obj.end()) {
          if (it->is_string())
            value = it->get<std::string>();
          else
            non_string = true;
        }
        break;
      }
      if (auto obj = lenient_object(candidate)) {
        saw_object = true;
        value = extract(*obj);
        break;
      }
    }
  }
  if (!value) {
    if (non_string)
      throw ResponseParseError(ResponseParseError::Kind::empty_value, "'" + key + "' is not a string");
    if (!saw_object)
      throw ResponseParseError(ResponseParseError::Kind::no_object, "no JSON object in response");
    throw ResponseParseError(ResponseParseError::Kind::key_missing, "response lacks '" + key + "'");
  }
  bool blank = true;
  for (unsigned char c : *value) blank = blank && std::isspace(c);
  if (blank) throw ResponseParseError(ResponseParseError::Kind::empty_value, "'" + key + "' is empty");
  return *value;
}

std::string parse_refinement_response(std::string_view raw, Side role) {
  return parse_refinement_response(raw, to_string(role));
}

std::string wrap_response(Side role, std::string_view text) {
  json obj;
  obj[std::string(to_string(role)) + "_paraphrased"] = std::string(text);
  return obj.dump();
}

namespace {

// Issues one logical call, retrying parse and transport failures.
template <class Parse>
auto call_with_retry(LlmBackend& backend, const std::string& prompt, const RefinerConfig& config,
                     CallKind kind, Parse parse) {
  CallRecord record{kind, {}, 0};
  std::string last_error;
  const unsigned limit = std::max(1u, config.retry.max_attempts);
  for (unsigned attempt = 0; attempt < limit; ++attempt) {
    if (attempt > 0) {
      const auto delay = config.retry.base_backoff * (1LL << (attempt - 1));
      if (config.retry.sleep)
        config.retry.sleep(delay);
      else
        std::this_thread::sleep_for(delay);
    }
    ++record.attempts;
    try {
      Completion c = backend.complete(prompt, config.params);
      record.usage += c.usage;
      return std::make_pair(parse(c.text), record);
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    } catch (const BackendError& e) {
      last_error = e.what();
    }
  }
  throw RefinementFailed(std::string(to_string(kind)) + " call failed after " +
                         std::to_string(limit) + " attempts: " + last_error);
}

}  // namespace

RefinedPair refine_sample(const RefinementInput& input, LlmBackend& backend, Rng& rng,
                          const RefinerConfig& config) {
  RefinedPair out;
  out.system.role = Side::system;
  out.user.role = Side::user;
  out.system.template_text = input.system_template;
  out.user.template_text = input.user_template;
  const auto [sys_index, sys_instruction] = select_paraphrase_prompt(rng);
  const auto [user_index, user_instruction] = select_paraphrase_prompt(rng);
  out.system.paraphrase_prompt_index = sys_index;
  out.user.paraphrase_prompt_index = user_index;

  auto single = [&](Side role) {
    return [role](const std::string& raw) { return parse_refinement_response(raw, role); };
  };

  switch (config.strategy) {
    case RefinementStrategy::utterance_level:
    case RefinementStrategy::multi_step: {
      auto [sys_text, sys_call] =
          call_with_retry(backend, build_modification_prompt(Side::system, input.domain, input.system_template),
                          config, CallKind::modify, single(Side::system));
      out.system.modified_text = sys_text;
      out.system.calls.push_back(sys_call);
      const std::string user_prompt =
          config.strategy == RefinementStrategy::multi_step
              ? build_multi_step_user_prompt(input.domain, out.system.modified_text, input.user_template)
              : build_modification_prompt(Side::user, input.domain, input.user_template);
      auto [user_text, user_call] =
          call_with_retry(backend, user_prompt, config, CallKind::modify, single(Side::user));
      out.user.modified_text = user_text;
      out.user.calls.push_back(user_call);
      break;
    }
    case RefinementStrategy::dialogue_level: {
      auto both = [](const std::string& raw) {
        return std::make_pair(parse_refinement_response(raw, Side::system),
                              parse_refinement_response(raw, Side::user));
      };
      auto [texts, call] = call_with_retry(
          backend, build_dialogue_prompt(input.domain, input.system_template, input.user_template),
          config, CallKind::modify, both);
      out.system.modified_text = texts.first;
      out.user.modified_text = texts.second;
      out.system.calls.push_back(call);
      break;
    }
  }

  for (auto* record : {&out.system, &out.user}) {
    const std::string& instruction = record->role == Side::system ? sys_instruction : user_instruction;
    auto [text, call] = call_with_retry(
        backend, build_paraphrase_prompt(record->role, instruction, record->modified_text), config,
        CallKind::paraphrase, single(record->role));
    record->paraphrased_text = text;
    record->calls.push_back(call);
  }
  return out;
}

}  // namespace dialsynth
