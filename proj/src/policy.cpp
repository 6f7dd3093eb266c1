#include "qagent/policy.hpp"

#include <fstream>

#include <json.hpp>

#include "qagent/error.hpp"
#include "qagent/text.hpp"

namespace qagent {

void GenerationRequest::validate() const {
    if (prompt.empty()) throw InvalidArgument("generation prompt is empty");
    if (max_tokens == 0) throw InvalidArgument("max_tokens must be positive");
    if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be non-negative");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidArgument("top_p must lie in (0, 1]");
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::end: return "end";
    }
    return "end";
}

GenerationChunk apply_stop_rules(std::string_view text, std::span<const std::string> stop,
                                 std::size_t max_tokens) {
    std::size_t best = std::string_view::npos;
    std::size_t best_len = 0;
    for (const auto& s : stop) {
        if (s.empty()) continue;
        const auto pos = text.find(s);
        if (pos < best) {
            best = pos;
            best_len = s.size();
        }
    }
    GenerationChunk chunk;
    const std::string_view kept = best == std::string_view::npos ? text : text.substr(0, best + best_len);

    // The token cap applies first: a stop sequence past it is never reached.
    std::size_t words = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const bool space = kept[i] == ' ' || kept[i] == '\n' || kept[i] == '\t' || kept[i] == '\r';
        if (!space && !in_word && ++words > max_tokens) {
            std::string_view cut = kept.substr(0, i);
            while (!cut.empty() && text::is_space(static_cast<unsigned char>(cut.back()))) cut.remove_suffix(1);
            chunk.text = std::string(cut);
            chunk.finish_reason = FinishReason::length;
            return chunk;
        }
        in_word = !space;
    }
    chunk.text = std::string(kept);
    chunk.finish_reason = best == std::string_view::npos ? FinishReason::end : FinishReason::stop;
    return chunk;
}

namespace {

class ScriptedSession final : public PolicySession {
public:
    explicit ScriptedSession(const std::vector<std::string>& script) : script_(script) {}

    GenerationChunk generate(const GenerationRequest& request) override {
        if (cursor_ >= script_.size()) return {};  // exhausted: empty text, finish end
        return apply_stop_rules(script_[cursor_++], request.stop, request.max_tokens);
    }

private:
    const std::vector<std::string>& script_;
    std::size_t cursor_ = 0;
};

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> default_script,
                               std::map<std::string, std::vector<std::string>, std::less<>> by_question)
    : default_script_(std::move(default_script)), by_question_(std::move(by_question)) {}

ScriptedPolicy ScriptedPolicy::from_file(const std::filesystem::path& path) {
    const auto doc = read_json_file(path);
    try {
        std::vector<std::string> fallback = doc.value("default", std::vector<std::string>{});
        std::map<std::string, std::vector<std::string>, std::less<>> episodes;
        if (doc.contains("episodes")) {
            for (const auto& [question, script] : doc.at("episodes").items()) {
                episodes.emplace(question, script.get<std::vector<std::string>>());
            }
        }
        return ScriptedPolicy(std::move(fallback), std::move(episodes));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::unique_ptr<PolicySession> ScriptedPolicy::start_episode(std::string_view question) const {
    const auto it = by_question_.find(question);
    return std::make_unique<ScriptedSession>(it == by_question_.end() ? default_script_ : it->second);
}

std::string render_generator_prompt(std::string_view question, std::span<const Passage> passages) {
    std::string prompt =
        "Answer the question using the passages below. Answer in a few words, "
        "with no explanation.\n\nPassages:\n";
    if (passages.empty()) {
        prompt += "(none)\n";
    }
    for (std::size_t i = 0; i < passages.size(); ++i) {
        prompt += "Doc " + std::to_string(i + 1) + " (Title: \"" + passages[i].title + "\") " +
                  passages[i].text + "\n";
    }
    prompt += "\nQuestion: ";
    prompt += question;
    prompt += "\nAnswer:";
    return prompt;
}

std::string frozen_generate(const Generator& generator, std::string_view question,
                            std::span<const Passage> passages) {
    return generator.answer(question, passages);
}

ScriptedGenerator::ScriptedGenerator(std::map<std::string, std::string, std::less<>> canned,
                                     std::map<std::string, std::vector<std::string>, std::less<>> extractive)
    : canned_(std::move(canned)), extractive_(std::move(extractive)) {}

ScriptedGenerator ScriptedGenerator::from_file(const std::filesystem::path& path) {
    const auto doc = read_json_file(path);
    try {
        std::map<std::string, std::string, std::less<>> canned;
        std::map<std::string, std::vector<std::string>, std::less<>> extractive;
        if (doc.contains("answers")) {
            for (const auto& [q, a] : doc.at("answers").items()) canned.emplace(q, a.get<std::string>());
        }
        if (doc.contains("extractive")) {
            for (const auto& [q, golds] : doc.at("extractive").items()) {
                extractive.emplace(q, golds.get<std::vector<std::string>>());
            }
        }
        return ScriptedGenerator(std::move(canned), std::move(extractive));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string ScriptedGenerator::answer(std::string_view question,
                                      std::span<const Passage> passages) const {
    if (const auto it = canned_.find(question); it != canned_.end()) return it->second;
    if (const auto it = extractive_.find(question); it != extractive_.end()) {
        for (const Passage& p : passages) {
            const std::string haystack = text::passage_key(p.text);
            for (const auto& gold : it->second) {
                const std::string needle = text::passage_key(gold);
                if (!needle.empty() && haystack.find(needle) != std::string::npos) return gold;
            }
        }
    }
    return std::string(kUnknownAnswer);
}

}  // namespace qagent
