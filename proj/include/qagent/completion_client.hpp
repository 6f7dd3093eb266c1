#pragma once

#include <string>

#include "qagent/http.hpp"
#include "qagent/policy.hpp"

namespace qagent {

struct CompletionConfig {
    /// Base URL such as http://127.0.0.1:8000/v1; "/completions" is appended
    /// unless already present.
    std::string endpoint;
    std::string model;
    std::string api_key;  // sent as a bearer token when non-empty
    http::RetryPolicy retry;
};

/// Client for an OpenAI-compatible text completions endpoint.
///
/// The server strips stop sequences from returned text; the client puts the
/// matched one back (using the `stop_reason` field when the server reports
/// it) so that callers always see the closing tag. A completion that ends
/// on a stop without naming which one is reported as a natural end.
class CompletionClient {
public:
    explicit CompletionClient(CompletionConfig config);

    GenerationChunk complete(const GenerationRequest& request) const;

    const CompletionConfig& config() const noexcept { return config_; }

private:
    CompletionConfig config_;
    http::Endpoint endpoint_;
};

class RemotePolicy final : public Policy {
public:
    explicit RemotePolicy(CompletionConfig config);

    std::unique_ptr<PolicySession> start_episode(std::string_view question) const override;

private:
    CompletionClient client_;
};

/// Frozen generator backed by a completion endpoint, prompted with
/// render_generator_prompt and decoded greedily.
class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(CompletionConfig config, std::size_t max_tokens = 32);

    std::string answer(std::string_view question, std::span<const Passage> passages) const override;

private:
    CompletionClient client_;
    std::size_t max_tokens_;
};

}  // namespace qagent
