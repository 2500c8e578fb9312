#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dialsynth/structure.hpp"

namespace dialsynth::icl {

/// Value canonicalization applied before exact-match scoring. Every step is
/// idempotent, so normalize(normalize(v)) == normalize(v).
struct NormalizerConfig {
  bool lowercase = true;
  /// Leading words dropped from values ("the", "a", "an").
  std::vector<std::string> articles = {"the", "a", "an"};
  /// Whole-word replacements, e.g. "center" -> "centre".
  std::map<std::string, std::string> synonyms = {{"center", "centre"}};
  /// "5pm", "5:30 pm", "05.30" -> "17:00", "17:30", "05:30".
  bool times_24h = true;

  friend bool operator==(const NormalizerConfig&, const NormalizerConfig&) = default;
};

/// JSON document with the NormalizerConfig fields; missing fields keep
/// their defaults. Throws ParseError.
NormalizerConfig parse_normalizer_config(std::string_view document);
NormalizerConfig load_normalizer_config(const std::filesystem::path& path);
std::string write_normalizer_config(const NormalizerConfig& config);

class ValueNormalizer {
 public:
  explicit ValueNormalizer(NormalizerConfig config = {});

  std::string operator()(std::string_view value) const;
  /// Normalizes every value; keys are lowercased and trimmed.
  DialogueState state(const DialogueState& s) const;
  const NormalizerConfig& config() const { return config_; }

 private:
  NormalizerConfig config_;
};

/// Lowercase, trim and collapse internal whitespace.
std::string basic_normalize(std::string_view text);

}  // namespace dialsynth::icl
