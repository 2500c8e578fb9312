#pragma once

// Minimal JSON-over-HTTP(S) POST used by the remote LLM and embedding
// backends. This is the only translation unit that includes cpp-httplib.

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialsynth::http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix, no trailing slash
};

/// Throws std::invalid_argument for anything but http(s)://host[:port][/path].
Url parse_url(std::string_view url);

struct Response {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POSTs `body` as application/json to base_url + path. Throws BackendError
/// when no response arrives (connection, TLS, timeout).
Response post_json(const std::string& base_url, const std::string& path, const std::string& body,
                   const Headers& headers, std::chrono::milliseconds timeout);

}  // namespace dialsynth::http
