#include "iclmod/http_util.hpp"

#include <cstdlib>

#include "httplib.h"
#include "iclmod/common.hpp"

namespace iclmod {

namespace {

// Splits "http://host:port/v1" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("base_url must include a scheme: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

}  // namespace

HttpResponse http_post_json(const std::string& base_url, const std::string& path,
                            const std::string& body, const std::string& api_key_env,
                            int timeout_sec) {
    HttpResponse out;
    auto [origin, prefix] = split_base_url(base_url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_sec, 0);
    client.set_read_timeout(timeout_sec, 0);
    httplib::Headers headers;
    if (!api_key_env.empty()) {
        if (const char* token = std::getenv(api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }
    auto result = client.Post(prefix + path, headers, body, "application/json");
    if (!result) {
        out.retryable = true;
        out.error = "connection error: " + httplib::to_string(result.error());
        return out;
    }
    out.status = result->status;
    out.body = result->body;
    if (result->status >= 200 && result->status < 300) {
        out.ok = true;
    } else {
        out.retryable = result->status >= 500 || result->status == 429;
        out.error = "HTTP " + std::to_string(result->status) + ": " +
                    result->body.substr(0, 200);
    }
    return out;
}

}  // namespace iclmod
