#pragma once

#include <string>

namespace iclmod {

struct HttpResponse {
    bool ok = false;
    bool retryable = false;  // connection error or 5xx/429
    int status = 0;
    std::string body;
    std::string error;
};

// POSTs a JSON body to base_url + path (base_url carries the /v1 prefix,
// e.g. "http://localhost:8080/v1"). Bearer auth is read from the named
// environment variable when set.
HttpResponse http_post_json(const std::string& base_url, const std::string& path,
                            const std::string& body, const std::string& api_key_env,
                            int timeout_sec);

}  // namespace iclmod
