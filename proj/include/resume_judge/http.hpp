#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace resume_judge::http {

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://localhost:8000"
  std::string base_path;         // e.g. "/v1", never with a trailing slash
};

/// Splits "http://host:port/v1" into the client origin and path prefix.
Endpoint parse_endpoint(const std::string& url);

struct Response {
  int status = 0;
  std::string body;
};

/// POSTs a JSON body to `endpoint.base_path + path`. Throws EndpointError on
/// transport failure (connection refused, timeout); HTTP error statuses are
/// returned to the caller.
Response post_json(const Endpoint& endpoint, const std::string& path, const nlohmann::json& body,
                   const std::string& bearer_token, double timeout_s);

/// Value of an environment variable, or empty.
std::string env_or_empty(const std::string& name);

}  // namespace resume_judge::http
