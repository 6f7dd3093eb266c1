#include "app_config.hpp"

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "qagent/error.hpp"

namespace qagent::cli {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_relative() ? base / p : p;
}

ModelSpec read_model(const json& j, const std::filesystem::path& base, const char* what) {
    ModelSpec spec;
    const std::string type = j.value("type", std::string("none"));
    if (type == "scripted") {
        spec.kind = ModelSpec::Kind::scripted;
        spec.script_path = resolve(base, j.at("script").get<std::string>());
    } else if (type == "remote") {
        spec.kind = ModelSpec::Kind::remote;
        spec.endpoint = j.at("endpoint").get<std::string>();
        spec.model = j.value("model", std::string{});
    } else if (type != "none") {
        throw InvalidArgument(std::string(what) + ": unknown type \"" + type + "\"");
    }
    return spec;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

AppConfig load_app_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    const auto base = path.parent_path();

    AppConfig config;
    try {
        const json j = json::parse(in);
        if (j.contains("corpus")) config.corpus_path = resolve(base, j.at("corpus").get<std::string>());
        if (j.contains("index")) config.index_path = resolve(base, j.at("index").get<std::string>());
        if (j.contains("retriever")) {
            const auto& r = j.at("retriever");
            const std::string type = r.value("type", std::string("embedded"));
            if (type == "remote") {
                config.retriever.remote = true;
                config.retriever.url = r.at("url").get<std::string>();
            } else if (type != "embedded") {
                throw InvalidArgument("retriever: unknown type \"" + type + "\"");
            }
        }
        if (j.contains("policy")) config.policy = read_model(j.at("policy"), base, "policy");
        if (j.contains("generator")) config.generator = read_model(j.at("generator"), base, "generator");
        if (j.contains("rollout")) {
            const auto& r = j.at("rollout");
            read_if(r, "max_turns", config.rollout.max_turns);
            read_if(r, "passages_per_query", config.rollout.passages_per_query);
            read_if(r, "max_total_tokens", config.rollout.max_total_tokens);
            read_if(r, "max_response_tokens", config.rollout.max_response_tokens);
            read_if(r, "temperature", config.rollout.temperature);
            read_if(r, "top_p", config.rollout.top_p);
            read_if(r, "retry_prompt", config.rollout.retry_prompt);
        }
        if (j.contains("grpo")) {
            const auto& g = j.at("grpo");
            read_if(g, "epsilon", config.grpo.epsilon);
            read_if(g, "beta", config.grpo.beta);
            read_if(g, "sigma_floor", config.grpo.sigma_floor);
        }
        if (j.contains("bm25")) {
            read_if(j.at("bm25"), "k1", config.bm25.k1);
            read_if(j.at("bm25"), "b", config.bm25.b);
        }
        if (j.contains("eval")) {
            read_if(j.at("eval"), "concurrency", config.concurrency);
            read_if(j.at("eval"), "fail_open", config.fail_open);
        }
    } catch (const json::exception& e) {
        throw InvalidArgument("config " + path.string() + ": " + e.what());
    }
    return config;
}

void apply_environment(AppConfig& config, const EnvLookup& lookup) {
    if (const auto key = lookup(kApiKeyVariable)) {
        config.policy.api_key = *key;
        config.generator.api_key = *key;
    }
}

std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr) return std::nullopt;
    return std::string(v);
}

}  // namespace qagent::cli
