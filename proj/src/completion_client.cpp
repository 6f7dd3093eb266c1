#include "qagent/completion_client.hpp"

#include <algorithm>

#include <json.hpp>

#include "qagent/error.hpp"
#include "qagent/text.hpp"

namespace qagent {

namespace {

http::Endpoint completions_endpoint(const std::string& base) {
    auto endpoint = http::parse_url(base);
    if (!endpoint.path.ends_with("/completions")) {
        if (!endpoint.path.ends_with('/')) endpoint.path += '/';
        endpoint.path += "completions";
    }
    return endpoint;
}

bool ends_with_any(std::string_view text, std::span<const std::string> stops) {
    return std::any_of(stops.begin(), stops.end(), [&](const std::string& s) {
        return !s.empty() && text.ends_with(s);
    });
}

}  // namespace

CompletionClient::CompletionClient(CompletionConfig config)
    : config_(std::move(config)), endpoint_(completions_endpoint(config_.endpoint)) {
    if (config_.model.empty()) throw InvalidArgument("completion client needs a model name");
}

GenerationChunk CompletionClient::complete(const GenerationRequest& request) const {
    request.validate();
    nlohmann::json body{
        {"model", config_.model},
        {"prompt", request.prompt},
        {"max_tokens", request.max_tokens},
        {"temperature", request.temperature},
        {"top_p", request.top_p},
        {"stop", request.stop},
        {"logprobs", request.logprobs ? nlohmann::json(1) : nlohmann::json(nullptr)},
    };
    http::Headers headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    const std::string raw = http::post_json(endpoint_, body.dump(), headers, config_.retry);

    GenerationChunk chunk;
    std::string finish;
    try {
        const auto response = nlohmann::json::parse(raw);
        const auto& choice = response.at("choices").at(0);
        chunk.text = choice.at("text").get<std::string>();
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            finish = choice["finish_reason"].get<std::string>();
        }
        if (finish == "stop" && !ends_with_any(chunk.text, request.stop)) {
            const auto reason = choice.find("stop_reason");
            if (reason != choice.end() && reason->is_string()) {
                const auto matched = reason->get<std::string>();
                if (std::find(request.stop.begin(), request.stop.end(), matched) != request.stop.end()) {
                    chunk.text += matched;
                }
            }
        }
        if (const auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
            const auto& tokens = lp->at("tokens");
            const auto& values = lp->at("token_logprobs");
            std::vector<TokenLogprob> logprobs;
            for (std::size_t i = 0; i < tokens.size() && i < values.size(); ++i) {
                logprobs.push_back({tokens[i].get<std::string>(),
                                    values[i].is_number() ? values[i].get<double>() : 0.0});
            }
            chunk.token_logprobs = std::move(logprobs);
        }
        if (const auto usage = response.find("usage"); usage != response.end() && usage->is_object()) {
            if (usage->contains("prompt_tokens")) chunk.prompt_tokens = usage->at("prompt_tokens").get<std::size_t>();
            if (usage->contains("completion_tokens")) {
                chunk.completion_tokens = usage->at("completion_tokens").get<std::size_t>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed completion response: ") + e.what());
    }

    // Enforce the earliest-stop contract even if the server overshot.
    const auto trimmed = apply_stop_rules(chunk.text, request.stop, static_cast<std::size_t>(-1));
    if (trimmed.finish_reason == FinishReason::stop) {
        chunk.text = trimmed.text;
        chunk.finish_reason = FinishReason::stop;
    } else if (finish == "length") {
        chunk.finish_reason = FinishReason::length;
    } else {
        chunk.finish_reason = FinishReason::end;
    }
    return chunk;
}

RemotePolicy::RemotePolicy(CompletionConfig config) : client_(std::move(config)) {}

namespace {

class RemoteSession final : public PolicySession {
public:
    explicit RemoteSession(const CompletionClient& client) : client_(client) {}
    GenerationChunk generate(const GenerationRequest& request) override { return client_.complete(request); }

private:
    const CompletionClient& client_;
};

}  // namespace

std::unique_ptr<PolicySession> RemotePolicy::start_episode(std::string_view) const {
    return std::make_unique<RemoteSession>(client_);
}

RemoteGenerator::RemoteGenerator(CompletionConfig config, std::size_t max_tokens)
    : client_(std::move(config)), max_tokens_(max_tokens) {}

std::string RemoteGenerator::answer(std::string_view question, std::span<const Passage> passages) const {
    GenerationRequest request;
    request.prompt = render_generator_prompt(question, passages);
    request.stop = {"\n"};
    request.max_tokens = max_tokens_;
    request.temperature = 0.0;
    request.top_p = 1.0;
    auto chunk = client_.complete(request);
    const auto answer = text::trim(chunk.text);
    return answer.empty() ? std::string(kUnknownAnswer) : std::string(answer);
}

}  // namespace qagent
