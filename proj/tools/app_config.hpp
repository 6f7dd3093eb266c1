#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "qagent/grpo.hpp"
#include "qagent/retriever.hpp"
#include "qagent/rollout.hpp"

namespace qagent::cli {

struct ModelSpec {
    enum class Kind { none, scripted, remote };
    Kind kind = Kind::none;
    std::filesystem::path script_path;  // scripted
    std::string endpoint;               // remote
    std::string model;                  // remote
    std::string api_key;                // remote; usually from the environment
};

struct RetrieverSpec {
    bool remote = false;
    std::string url;
};

struct AppConfig {
    std::filesystem::path corpus_path;
    std::filesystem::path index_path;
    RetrieverSpec retriever;
    ModelSpec policy;
    ModelSpec generator;
    RolloutConfig rollout;
    grpo::GrpoParams grpo;
    Bm25Params bm25;
    std::size_t concurrency = 8;
    bool fail_open = true;
};

/// Reads a JSON config file. Relative paths are resolved against the
/// file's directory. Throws IoError when unreadable, InvalidArgument on
/// bad values.
AppConfig load_app_config(const std::filesystem::path& path);

/// Name of the variable holding the API key for remote models.
inline constexpr const char* kApiKeyVariable = "QAGENT_API_KEY";

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// Secrets come from the environment only: sets both models' api_key when
/// the variable is present.
void apply_environment(AppConfig& config, const EnvLookup& lookup);

std::optional<std::string> process_env(const char* name);

}  // namespace qagent::cli
