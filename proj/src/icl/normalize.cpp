#include "dialsynth/icl/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "json_util.hpp"

namespace dialsynth::icl {

using jsonutil::json;

std::string basic_normalize(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

NormalizerConfig parse_normalizer_config(std::string_view document) {
  const json j = jsonutil::parse(document, "$");
  jsonutil::require_object(j, "$");
  jsonutil::reject_unknown(j, "$", {"lowercase", "articles", "synonyms", "times_24h"});
  NormalizerConfig c;
  if (j.contains("lowercase")) c.lowercase = jsonutil::get_bool(j, "$", "lowercase");
  if (j.contains("times_24h")) c.times_24h = jsonutil::get_bool(j, "$", "times_24h");
  if (j.contains("articles")) {
    c.articles.clear();
    for (const auto& a : jsonutil::get_array(j, "$", "articles")) {
      if (!a.is_string()) throw ParseError("$.articles", "expected strings");
      c.articles.push_back(a.get<std::string>());
    }
  }
  if (j.contains("synonyms")) {
    const json& s = jsonutil::field(j, "$", "synonyms");
    jsonutil::require_object(s, "$.synonyms");
    c.synonyms.clear();
    for (const auto& [k, v] : s.items()) {
      if (!v.is_string()) throw ParseError("$.synonyms." + k, "expected a string");
      c.synonyms[k] = v.get<std::string>();
    }
  }
  return c;
}

NormalizerConfig load_normalizer_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read normalizer config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_normalizer_config(buf.str());
}

std::string write_normalizer_config(const NormalizerConfig& c) {
  jsonutil::ordered_json j;
  j["lowercase"] = c.lowercase;
  j["articles"] = c.articles;
  j["synonyms"] = c.synonyms;
  j["times_24h"] = c.times_24h;
  return j.dump(2) + "\n";
}

ValueNormalizer::ValueNormalizer(NormalizerConfig config) : config_(std::move(config)) {}

namespace {

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& ws) {
  std::string out;
  for (const auto& w : ws) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string two_digits(int n) {
  std::string s = std::to_string(n);
  return s.size() == 1 ? "0" + s : s;
}

std::string to_24h(const std::string& v) {
  static const std::regex twelve(R"(^(\d{1,2})(?:[:.](\d{2}))?\s*(am|pm|a\.m\.|p\.m\.)$)",
                                 std::regex::icase);
  static const std::regex clock(R"(^(\d{1,2})[:.](\d{2})$)");
  std::smatch m;
  if (std::regex_match(v, m, twelve)) {
    int h = std::stoi(m[1].str());
    const int min = m[2].matched ? std::stoi(m[2].str()) : 0;
    if (h < 1 || h > 12 || min > 59) return v;
    const bool pm = std::tolower(static_cast<unsigned char>(m[3].str()[0])) == 'p';
    if (h == 12) h = 0;
    if (pm) h += 12;
    return two_digits(h) + ":" + two_digits(min);
  }
  if (std::regex_match(v, m, clock)) {
    const int h = std::stoi(m[1].str());
    const int min = std::stoi(m[2].str());
    if (h > 23 || min > 59) return v;
    return two_digits(h) + ":" + two_digits(min);
  }
  return v;
}

}  // namespace

std::string ValueNormalizer::operator()(std::string_view value) const {
  std::string v(value);
  for (int round = 0; round < 8; ++round) {
    std::string next = config_.lowercase ? basic_normalize(v) : join(words(v));
    auto ws = words(next);
    for (auto& w : ws) {
      auto it = config_.synonyms.find(w);
      if (it != config_.synonyms.end()) w = it->second;
    }
    next = join(words(join(ws)));
    ws = words(next);
    std::size_t drop = 0;
    while (ws.size() - drop > 1 &&
           std::find(config_.articles.begin(), config_.articles.end(), ws[drop]) != config_.articles.end())
      ++drop;
    ws.erase(ws.begin(), ws.begin() + static_cast<std::ptrdiff_t>(drop));
    next = join(ws);
    if (config_.times_24h) next = to_24h(next);
    if (next == v) break;
    v = std::move(next);
  }
  return v;
}

DialogueState ValueNormalizer::state(const DialogueState& s) const {
  DialogueState out;
  for (const auto& [k, v] : s) out.set({basic_normalize(k.domain), basic_normalize(k.slot)}, (*this)(v));
  return out;
}

}  // namespace dialsynth::icl
