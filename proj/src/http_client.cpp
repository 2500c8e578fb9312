#include "http_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <stdexcept>

#include "dialsynth/errors.hpp"

namespace dialsynth::http {

Url parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw std::invalid_argument("URL without scheme: " + std::string(url));
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw std::invalid_argument("unsupported URL scheme: " + std::string(url));
  auto rest = url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  Url out;
  out.origin = std::string(url.substr(0, scheme_end + 3)) + std::string(rest.substr(0, slash));
  if (slash != std::string_view::npos) out.path = std::string(rest.substr(slash));
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  if (rest.substr(0, slash).empty()) throw std::invalid_argument("URL without host: " + std::string(url));
  return out;
}

Response post_json(const std::string& base_url, const std::string& path, const std::string& body,
                   const Headers& headers, std::chrono::milliseconds timeout) {
  const Url url = parse_url(base_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(url.path + path, h, body, "application/json");
  if (!res) throw BackendError("POST " + url.origin + url.path + path + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

}  // namespace dialsynth::http
