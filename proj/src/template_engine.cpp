#include "dialsynth/template_engine.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "dialsynth/errors.hpp"
#include "json_util.hpp"
#include "resources.hpp"

namespace dialsynth {

using jsonutil::json;

std::pair<int, int> TemplateBank::key(const Intent& intent) {
  return std::visit(
      [](auto i) { return std::pair<int, int>{static_cast<int>(side_of(Intent{i})), static_cast<int>(i)}; },
      intent);
}

const std::vector<Template>& TemplateBank::templates(const Intent& intent) const {
  auto it = by_intent_.find(key(intent));
  if (it == by_intent_.end())
    throw ValidationError("", "template bank has no " + std::string(to_string(side_of(intent))) +
                                  " template for '" + std::string(to_string(intent)) + "'");
  return it->second;
}

bool TemplateBank::covers(const Intent& intent) const { return by_intent_.count(key(intent)) > 0; }

std::vector<Template> TemplateBank::all() const {
  std::vector<Template> out;
  for (const auto& [_, list] : by_intent_) out.insert(out.end(), list.begin(), list.end());
  return out;
}

void TemplateBank::add(Template t) { by_intent_[key(t.intent)].push_back(std::move(t)); }

namespace {

struct Placeholders {
  bool d = false, s = false, v = false;
};

Placeholders scan(std::string_view text, const std::string& location) {
  Placeholders p;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '<') continue;
    auto close = text.find('>', i);
    if (close == std::string_view::npos) continue;
    auto token = text.substr(i + 1, close - i - 1);
    bool word = !token.empty() && std::all_of(token.begin(), token.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_' || c == '/';
    });
    if (!word) continue;
    if (token == "d") p.d = true;
    else if (token == "s") p.s = true;
    else if (token == "v") p.v = true;
    else throw ValidationError(location, "unknown placeholder <" + std::string(token) + ">");
    i = close;
  }
  return p;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

}  // namespace

void validate_template(const Template& t, const std::string& location) {
  if (side_of(t.intent) != t.side)
    throw ValidationError(location, "intent '" + std::string(to_string(t.intent)) +
                                        "' does not belong to side " + std::string(to_string(t.side)));
  if (t.text.empty()) throw ValidationError(location, "empty template text");
  const Placeholders p = scan(t.text, location);
  switch (act_mode(t.intent)) {
    case ActMode::full: break;
    case ActMode::slot_only:
      if (p.v && p.s)
        throw ValidationError(location, "slot_only template may not carry both <s> and <v>");
      break;
    case ActMode::bare:
      if (p.d || p.s || p.v) throw ValidationError(location, "bare template may not carry placeholders");
      break;
  }
}

void validate_template_bank(const TemplateBank& bank) {
  auto check = [&](const Intent& intent) {
    const std::string where =
        std::string(to_string(side_of(intent))) + "." + std::string(to_string(intent));
    if (!bank.covers(intent)) throw ValidationError(where, "no templates for this act");
    const auto n = bank.templates(intent).size();
    if (n < 2 || n > 4)
      throw ValidationError(where, "expected 2-4 templates, found " + std::to_string(n));
  };
  for (auto s : kSystemIntents) check(s);
  for (auto u : kUserIntents) check(u);
}

TemplateBank load_template_bank(std::string_view document) {
  const json root = jsonutil::parse(document, "$");
  if (!root.is_array()) throw ParseError("$", "expected a list of template records");
  TemplateBank bank;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    const json& r = root[i];
    jsonutil::require_object(r, path);
    jsonutil::reject_unknown(r, path, {"side", "intent", "text"});
    const std::string side_name = jsonutil::get_string(r, path, "side");
    const std::string intent_name = jsonutil::get_string(r, path, "intent");
    Template t;
    if (side_name == "system") {
      auto intent = parse_system_intent(intent_name);
      if (!intent) throw ParseError(path + ".intent", "unknown system intent '" + intent_name + "'");
      t.intent = *intent;
      t.side = Side::system;
    } else if (side_name == "user") {
      auto intent = parse_user_intent(intent_name);
      if (!intent) throw ParseError(path + ".intent", "unknown user intent '" + intent_name + "'");
      t.intent = *intent;
      t.side = Side::user;
    } else {
      throw ParseError(path + ".side", "side must be 'system' or 'user'");
    }
    t.text = jsonutil::get_string(r, path, "text");
    validate_template(t, path + ".text");
    bank.add(std::move(t));
  }
  validate_template_bank(bank);
  return bank;
}

TemplateBank load_template_bank_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read template bank " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_template_bank(buf.str());
}

std::string write_template_bank(const TemplateBank& bank) {
  jsonutil::ordered_json root = jsonutil::ordered_json::array();
  for (const auto& t : bank.all()) {
    jsonutil::ordered_json r;
    r["side"] = std::string(to_string(t.side));
    r["intent"] = std::string(to_string(t.intent));
    r["text"] = t.text;
    root.push_back(std::move(r));
  }
  return root.dump(2) + "\n";
}

std::string_view builtin_template_document() { return resources::builtin_templates(); }

const TemplateBank& builtin_template_bank() {
  static const TemplateBank bank = load_template_bank(resources::builtin_templates());
  return bank;
}

std::string render_clause(std::string_view text, ActMode mode, std::string_view domain,
                          std::string_view slot, std::string_view value) {
  std::string out(text);
  const bool v_names_slot = mode == ActMode::slot_only && out.find("<s>") == std::string::npos;
  replace_all(out, "<d>", domain);
  replace_all(out, "<s>", slot);
  replace_all(out, "<v>", v_names_slot ? slot : value);
  return out;
}

Realization realize_act(const TemplateBank& bank, const DialogueAct& act, Rng& rng) {
  const auto& list = bank.templates(act.intent);
  Realization r;
  r.template_id = rng.uniform(list.size());
  const std::string& text = list[r.template_id].text;
  if (act.slot_values.empty()) {
    r.text = render_clause(text, act.mode, act.domain, "", "");
    return r;
  }
  for (std::size_t i = 0; i < act.slot_values.size(); ++i) {
    const auto& sv = act.slot_values[i];
    if (i > 0) r.text += ", and ";
    r.text += render_clause(text, act.mode, sv.domain, sv.slot, sv.value);
  }
  return r;
}

bool verify_grounding(const DialogueAct& act, std::string_view text) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  const std::string haystack = lower(text);
  return std::all_of(act.slot_values.begin(), act.slot_values.end(), [&](const SlotValue& sv) {
    return haystack.find(lower(sv.value)) != std::string::npos;
  });
}

}  // namespace dialsynth
