#include "resume_judge/http.hpp"

#include <cstdlib>
#include <regex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "resume_judge/error.hpp"

namespace resume_judge::http {

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw ValidationError("invalid endpoint url: " + url);
  }
  Endpoint ep{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  while (!ep.base_path.empty() && ep.base_path.back() == '/') {
    ep.base_path.pop_back();
  }
  return ep;
}

Response post_json(const Endpoint& endpoint, const std::string& path, const nlohmann::json& body,
                   const std::string& bearer_token, double timeout_s) {
  httplib::Client client(endpoint.scheme_host_port);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + bearer_token);
  }
  auto res = client.Post(endpoint.base_path + path, headers, body.dump(), "application/json");
  if (!res) {
    throw EndpointError("request to " + endpoint.scheme_host_port + endpoint.base_path + path +
                        " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace resume_judge::http
