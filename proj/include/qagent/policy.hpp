#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qagent/passage.hpp"

namespace qagent {

struct GenerationRequest {
    std::string prompt;
    std::vector<std::string> stop;
    std::size_t max_tokens = 512;
    double temperature = 1.0;
    double top_p = 1.0;
    bool logprobs = false;

    /// Throws InvalidArgument on an empty prompt or out-of-range sampling knobs.
    void validate() const;
};

enum class FinishReason { stop, length, end };

std::string_view to_string(FinishReason reason);

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct GenerationChunk {
    std::string text;  // includes the stop sequence when finish_reason == stop
    FinishReason finish_reason = FinishReason::end;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    std::optional<std::size_t> prompt_tokens;
    std::optional<std::size_t> completion_tokens;
};

/// Cuts `text` after the earliest stop sequence (kept in the output). When
/// more than `max_tokens` whitespace tokens come before that point, the text
/// is cut at the limit instead, with finish_reason length.
GenerationChunk apply_stop_rules(std::string_view text, std::span<const std::string> stop,
                                 std::size_t max_tokens);

/// Generation state owned by a single episode.
class PolicySession {
public:
    virtual ~PolicySession() = default;
    virtual GenerationChunk generate(const GenerationRequest& request) = 0;
};

/// Shared, thread-safe factory of per-episode sessions.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::unique_ptr<PolicySession> start_episode(std::string_view question) const = 0;
};

/// Replays fixed segments. Each episode gets its own cursor into the script
/// for its question (or the default script when the question has none).
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<std::string> default_script,
                            std::map<std::string, std::vector<std::string>, std::less<>> by_question = {});

    /// JSON: {"default": [segments...], "episodes": {"question": [segments...]}}
    static ScriptedPolicy from_file(const std::filesystem::path& path);

    std::unique_ptr<PolicySession> start_episode(std::string_view question) const override;

private:
    std::vector<std::string> default_script_;
    std::map<std::string, std::vector<std::string>, std::less<>> by_question_;
};

inline constexpr std::string_view kUnknownAnswer = "unknown";
inline constexpr std::string_view kGeneratorPromptVersion = "generator-prompt-v1";

/// The fixed prompt a frozen generator answers from.
std::string render_generator_prompt(std::string_view question, std::span<const Passage> passages);

/// Frozen answer model: question and passages in, short answer out.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string answer(std::string_view question, std::span<const Passage> passages) const = 0;
};

std::string frozen_generate(const Generator& generator, std::string_view question,
                            std::span<const Passage> passages);

/// Deterministic stand-in for a frozen generator. A canned answer for the
/// question wins; otherwise, when gold answers are registered for the
/// question, the first gold answer found in the passages (scanned in order)
/// is returned; otherwise "unknown".
class ScriptedGenerator final : public Generator {
public:
    ScriptedGenerator() = default;
    ScriptedGenerator(std::map<std::string, std::string, std::less<>> canned,
                      std::map<std::string, std::vector<std::string>, std::less<>> extractive);

    /// JSON: {"answers": {"question": "answer"}, "extractive": {"question": ["gold", ...]}}
    static ScriptedGenerator from_file(const std::filesystem::path& path);

    std::string answer(std::string_view question, std::span<const Passage> passages) const override;

private:
    std::map<std::string, std::string, std::less<>> canned_;
    std::map<std::string, std::vector<std::string>, std::less<>> extractive_;
};

}  // namespace qagent
