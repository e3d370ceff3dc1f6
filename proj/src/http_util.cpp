// Copyright 2026 The fitrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "http_util.hpp"

#include "fitrank/common.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen internals.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace fitrank::detail {

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = base_url.find('/', host_start);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string path = base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {base_url.substr(0, path_start), path};
}

nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body, const std::string& bearer_token) {
  const auto [origin, prefix] = split_base_url(base_url);
  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  auto res = client.Post(prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error("POST " + origin + prefix + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error("POST " + origin + prefix + path + " returned HTTP " +
                std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error("unparseable response from " + origin + prefix + path + ": " + e.what());
  }
}

}  // namespace fitrank::detail
