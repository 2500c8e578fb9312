#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialsynth/dialogue_model.hpp"
#include "dialsynth/rng.hpp"
#include "dialsynth/structure.hpp"

namespace dialsynth {

/// Domain-agnostic response pattern. Placeholders `<d>`, `<s>`, `<v>` are
/// replaced by the act's domain, slot and value.
struct Template {
  Intent intent;
  Side side = Side::system;
  std::string text;

  friend bool operator==(const Template&, const Template&) = default;
};

/// 2-4 templates for each of the 22 (side, intent) pairs.
class TemplateBank {
 public:
  TemplateBank() = default;

  /// Throws ValidationError when an intent is not covered.
  const std::vector<Template>& templates(const Intent& intent) const;
  bool covers(const Intent& intent) const;
  std::size_t key_count() const { return by_intent_.size(); }
  std::vector<Template> all() const;

  void add(Template t);

  friend bool operator==(const TemplateBank&, const TemplateBank&) = default;

 private:
  static std::pair<int, int> key(const Intent& intent);
  std::map<std::pair<int, int>, std::vector<Template>> by_intent_;
};

/// Placeholder and mode checks for a single template; throws ValidationError
/// naming `location`.
void validate_template(const Template& t, const std::string& location = "");

/// Full-bank checks: coverage of all 22 acts and 2-4 templates each.
void validate_template_bank(const TemplateBank& bank);

/// Parses a JSON list of {side, intent, text} records and validates it.
TemplateBank load_template_bank(std::string_view document);
TemplateBank load_template_bank_file(const std::string& path);
std::string write_template_bank(const TemplateBank& bank);

const TemplateBank& builtin_template_bank();
std::string_view builtin_template_document();

struct Realization {
  std::string text;
  std::size_t template_id = 0;
};

/// Picks one template uniformly and renders one clause per slot-value,
/// joined with ", and ". Every act value appears verbatim in the result.
Realization realize_act(const TemplateBank& bank, const DialogueAct& act, Rng& rng);

/// Renders `text` for one slot-value. `<v>` in a slot_only template without
/// `<s>` stands for the slot name.
std::string render_clause(std::string_view text, ActMode mode, std::string_view domain,
                          std::string_view slot, std::string_view value);

/// True iff every act value occurs in `text`, ignoring case.
bool verify_grounding(const DialogueAct& act, std::string_view text);

}  // namespace dialsynth
