#pragma once

// Strict readers for the project's JSON documents. Every failure names the
// JSON path of the offending element.

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dialsynth/errors.hpp"

namespace dialsynth::jsonutil {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline json parse(std::string_view text, const std::string& location = "") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(location, std::string("malformed JSON: ") + e.what());
  }
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path.empty() ? "$" : path, "expected an object");
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(path + "." + key, "unknown field");
  }
}

inline const json& field(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "." + key, "missing field");
  return *it;
}

inline std::string get_string(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_string()) throw ParseError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline bool get_bool(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_boolean()) throw ParseError(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

inline std::uint64_t get_uint(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ParseError(path + "." + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline const json& get_array(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_array()) throw ParseError(path + "." + key, "expected an array");
  return v;
}

}  // namespace dialsynth::jsonutil
