#include "qagent/http.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>

namespace qagent::http {

HttpStatusError::HttpStatusError(int status, std::string body_excerpt, int attempts)
    : Error("HTTP " + std::to_string(status) + ": " + body_excerpt),
      status_(status),
      body_excerpt_(std::move(body_excerpt)),
      attempts_(attempts) {}

Endpoint parse_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw InvalidArgument("not a URL: " + std::string(url));
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw InvalidArgument("unsupported URL scheme in " + std::string(url));
    }
    const auto authority_begin = scheme_end + 3;
    auto path_begin = url.find('/', authority_begin);
    if (path_begin == std::string_view::npos) path_begin = url.size();
    const auto authority = url.substr(authority_begin, path_begin - authority_begin);
    if (authority.empty() || authority.front() == ':') {
        throw InvalidArgument("URL has no host: " + std::string(url));
    }
    if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
        const auto port = authority.substr(colon + 1);
        if (port.empty() || port.find_first_not_of("0123456789") != std::string_view::npos) {
            throw InvalidArgument("bad port in URL " + std::string(url));
        }
    }
    Endpoint endpoint;
    endpoint.origin = std::string(url.substr(0, path_begin));
    endpoint.path = path_begin < url.size() ? std::string(url.substr(path_begin)) : "/";
    return endpoint;
}

namespace {

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

std::string post_json(const Endpoint& endpoint, const std::string& body, const Headers& headers,
                      const RetryPolicy& retry) {
    httplib::Headers request_headers;
    for (const auto& [name, value] : headers) request_headers.emplace(name, value);

    const int attempts = std::max(1, retry.max_attempts);
    auto backoff = retry.initial_backoff;
    std::string last_failure;
    int last_status = 0;
    std::string last_body;

    for (int attempt = 1; attempt <= attempts; ++attempt) {
        // One client per call keeps concurrent requests independent.
        httplib::Client client(endpoint.origin);
        client.set_connection_timeout(retry.timeout);
        client.set_read_timeout(retry.timeout);
        client.set_write_timeout(retry.timeout);

        auto result = client.Post(endpoint.path, request_headers, body, "application/json");
        if (!result) {
            last_failure = httplib::to_string(result.error());
            last_status = 0;
        } else if (result->status >= 200 && result->status < 300) {
            return result->body;
        } else if (result->status < 500) {
            throw HttpStatusError(result->status, excerpt(result->body), attempt);
        } else {
            last_status = result->status;
            last_body = result->body;
        }

        if (attempt < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(static_cast<long long>(
                std::llround(static_cast<double>(backoff.count()) * retry.backoff_multiplier)));
        }
    }
    if (last_status != 0) throw HttpStatusError(last_status, excerpt(last_body), attempts);
    throw TransportError("POST " + endpoint.origin + endpoint.path + " failed after " +
                             std::to_string(attempts) + " attempts: " + last_failure,
                         attempts);
}

}  // namespace qagent::http
