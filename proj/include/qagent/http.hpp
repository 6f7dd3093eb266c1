#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qagent/error.hpp"

// Minimal JSON-over-HTTP plumbing shared by the remote retriever and the
// completion client.
namespace qagent::http {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // always starts with '/'
};

/// Splits an http:// URL into origin and path. Throws InvalidArgument on
/// anything that is not a well-formed http(s) URL.
Endpoint parse_url(std::string_view url);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    double backoff_multiplier = 2.0;
    std::chrono::seconds timeout{120};
};

/// Connection-level failure that survived every retry.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts) : Error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Server answered with a non-2xx status.
class HttpStatusError : public Error {
public:
    HttpStatusError(int status, std::string body_excerpt, int attempts);
    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    std::string body_excerpt_;
    int attempts_;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POSTs `body` as application/json and returns the response body.
/// Transport failures and 5xx responses are retried with exponential
/// backoff; 4xx responses fail immediately.
std::string post_json(const Endpoint& endpoint, const std::string& body,
                      const Headers& headers, const RetryPolicy& retry);

}  // namespace qagent::http
