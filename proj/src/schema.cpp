#include "dialsynth/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dialsynth/errors.hpp"
#include "json_util.hpp"
#include "resources.hpp"

namespace dialsynth {

using jsonutil::json;
using jsonutil::ordered_json;

std::string_view to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::categorical: return "categorical";
    case SlotKind::open: return "open";
    case SlotKind::boolean: return "boolean";
    case SlotKind::time: return "time";
  }
  return "?";
}

std::string_view to_string(SlotRole role) {
  return role == SlotRole::informable ? "informable" : "requestable";
}

const SlotSpec* DomainSpec::find(std::string_view slot) const {
  for (const auto& s : slots)
    if (s.name == slot) return &s;
  return nullptr;
}

const DomainSpec* Schema::find_domain(std::string_view name) const {
  for (const auto& d : domains)
    if (d.name == name) return &d;
  return nullptr;
}

const DomainSpec& Schema::domain(std::string_view name) const {
  if (const auto* d = find_domain(name)) return *d;
  throw std::out_of_range("unknown domain '" + std::string(name) + "'");
}

const SlotSpec* Schema::find_slot(std::string_view domain, std::string_view slot) const {
  const auto* d = find_domain(domain);
  return d ? d->find(slot) : nullptr;
}

std::vector<std::string> Schema::domain_names() const {
  std::vector<std::string> out;
  out.reserve(domains.size());
  for (const auto& d : domains) out.push_back(d.name);
  return out;
}

bool is_time_value(std::string_view v) {
  if (v.size() != 5 || v[2] != ':') return false;
  for (std::size_t i : {0u, 1u, 3u, 4u})
    if (!std::isdigit(static_cast<unsigned char>(v[i]))) return false;
  int hh = (v[0] - '0') * 10 + (v[1] - '0');
  int mm = (v[3] - '0') * 10 + (v[4] - '0');
  return hh < 24 && mm < 60;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Domains: [a-z][a-z0-9_]*. Slots additionally allow inner spaces
// ("book day"). Neither may contain '-', the key separator.
bool valid_identifier(std::string_view s, bool allow_space) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s.front()))) return false;
  if (s.back() == ' ') return false;
  return std::all_of(s.begin(), s.end(), [&](unsigned char c) {
    return std::islower(c) || std::isdigit(c) || c == '_' || (allow_space && c == ' ');
  });
}

SlotKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "categorical") return SlotKind::categorical;
  if (s == "open") return SlotKind::open;
  if (s == "boolean") return SlotKind::boolean;
  if (s == "time") return SlotKind::time;
  throw ParseError(path, "unknown slot kind '" + s + "'");
}

SlotSpec parse_slot(const json& j, const std::string& path) {
  jsonutil::require_object(j, path);
  jsonutil::reject_unknown(j, path, {"name", "kind", "values", "informable", "requestable"});
  SlotSpec s;
  s.name = lower(jsonutil::get_string(j, path, "name"));
  s.kind = parse_kind(jsonutil::get_string(j, path, "kind"), path + ".kind");
  const json& values = jsonutil::get_array(j, path, "values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_string())
      throw ParseError(path + ".values[" + std::to_string(i) + "]", "expected a string");
    s.values.push_back(values[i].get<std::string>());
  }
  s.informable = jsonutil::get_bool(j, path, "informable");
  s.requestable = jsonutil::get_bool(j, path, "requestable");
  return s;
}

}  // namespace

void validate_schema(const Schema& schema) {
  if (schema.domains.empty()) throw ValidationError("$.domains", "schema has no domains");
  std::set<std::string> domain_names;
  for (std::size_t di = 0; di < schema.domains.size(); ++di) {
    const auto& d = schema.domains[di];
    const std::string dpath = "$.domains[" + std::to_string(di) + "]";
    if (!valid_identifier(d.name, false))
      throw ValidationError(dpath + ".name", "invalid domain name '" + d.name + "'");
    if (!domain_names.insert(d.name).second)
      throw ValidationError(dpath + ".name", "duplicate domain '" + d.name + "'");
    if (d.slots.empty()) throw ValidationError(dpath + ".slots", "domain has no slots");
    std::set<std::string> slot_names;
    for (std::size_t si = 0; si < d.slots.size(); ++si) {
      const auto& s = d.slots[si];
      const std::string spath = dpath + ".slots[" + std::to_string(si) + "]";
      if (!valid_identifier(s.name, true))
        throw ValidationError(spath + ".name", "invalid slot name '" + s.name + "'");
      if (!slot_names.insert(s.name).second)
        throw ValidationError(spath + ".name", "duplicate slot '" + s.name + "'");
      if (!s.informable && !s.requestable)
        throw ValidationError(spath, "slot is neither informable nor requestable");
      if (s.values.empty()) throw ValidationError(spath + ".values", "empty value list");
      std::set<std::string> seen;
      for (std::size_t vi = 0; vi < s.values.size(); ++vi) {
        const auto& v = s.values[vi];
        const std::string vpath = spath + ".values[" + std::to_string(vi) + "]";
        if (v.empty()) throw ValidationError(vpath, "empty value");
        if (!seen.insert(v).second) throw ValidationError(vpath, "duplicate value '" + v + "'");
        if (s.kind == SlotKind::boolean && v != "yes" && v != "no" && v != "free")
          throw ValidationError(vpath, "boolean slot value must be one of yes/no/free");
        if (s.kind == SlotKind::time && !is_time_value(v))
          throw ValidationError(vpath, "time value must be HH:MM");
      }
    }
  }
}

Schema load_schema(std::string_view document) {
  const json root = jsonutil::parse(document, "$");
  jsonutil::require_object(root, "$");
  jsonutil::reject_unknown(root, "$", {"version", "domains"});
  Schema schema;
  schema.version = jsonutil::get_string(root, "$", "version");
  const json& domains = jsonutil::get_array(root, "$", "domains");
  for (std::size_t di = 0; di < domains.size(); ++di) {
    const std::string dpath = "$.domains[" + std::to_string(di) + "]";
    const json& dj = domains[di];
    jsonutil::require_object(dj, dpath);
    jsonutil::reject_unknown(dj, dpath, {"name", "slots"});
    DomainSpec d;
    d.name = lower(jsonutil::get_string(dj, dpath, "name"));
    const json& slots = jsonutil::get_array(dj, dpath, "slots");
    for (std::size_t si = 0; si < slots.size(); ++si)
      d.slots.push_back(parse_slot(slots[si], dpath + ".slots[" + std::to_string(si) + "]"));
    schema.domains.push_back(std::move(d));
  }
  validate_schema(schema);
  return schema;
}

Schema load_schema_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read schema file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_schema(buf.str());
}

std::string write_schema(const Schema& schema) {
  ordered_json root;
  root["version"] = schema.version;
  root["domains"] = ordered_json::array();
  for (const auto& d : schema.domains) {
    ordered_json dj;
    dj["name"] = d.name;
    dj["slots"] = ordered_json::array();
    for (const auto& s : d.slots) {
      ordered_json sj;
      sj["name"] = s.name;
      sj["kind"] = std::string(to_string(s.kind));
      sj["values"] = s.values;
      sj["informable"] = s.informable;
      sj["requestable"] = s.requestable;
      dj["slots"].push_back(std::move(sj));
    }
    root["domains"].push_back(std::move(dj));
  }
  return root.dump(2) + "\n";
}

std::string_view builtin_schema_document() { return resources::builtin_schema(); }

const Schema& builtin_schema() {
  static const Schema schema = load_schema(resources::builtin_schema());
  return schema;
}

std::vector<const SlotSpec*> eligible_slots(const DomainSpec& domain, SlotRole role) {
  std::vector<const SlotSpec*> out;
  for (const auto& s : domain.slots)
    if (s.eligible(role)) out.push_back(&s);
  return out;
}

std::vector<const SlotSpec*> booking_slots(const DomainSpec& domain) {
  std::vector<const SlotSpec*> out;
  for (const auto& s : domain.slots)
    if (s.informable && s.is_booking()) out.push_back(&s);
  if (out.empty()) return eligible_slots(domain, SlotRole::informable);
  return out;
}

std::vector<SlotValue> sample_slot_values(const Schema& schema, std::string_view domain,
                                          std::size_t count, SlotRole role, Rng& rng) {
  const DomainSpec& d = schema.domain(domain);
  const auto slots = eligible_slots(d, role);
  if (count == 0 || count > slots.size())
    throw std::invalid_argument("cannot sample " + std::to_string(count) + " " +
                                std::string(to_string(role)) + " slots from domain '" + d.name +
                                "' (" + std::to_string(slots.size()) + " eligible)");
  std::vector<SlotValue> out;
  out.reserve(count);
  for (std::size_t idx : rng.choose(slots.size(), count)) {
    const SlotSpec& s = *slots[idx];
    out.push_back({d.name, s.name, rng.pick(s.values)});
  }
  return out;
}

bool validate_value(const Schema& schema, const SlotValue& sv) {
  const SlotSpec* s = schema.find_slot(sv.domain, sv.slot);
  if (!s || sv.value.empty()) return false;
  switch (s->kind) {
    case SlotKind::categorical:
    case SlotKind::boolean:
      return std::find(s->values.begin(), s->values.end(), sv.value) != s->values.end();
    case SlotKind::time: return is_time_value(sv.value);
    case SlotKind::open: return true;
  }
  return false;
}

}  // namespace dialsynth
