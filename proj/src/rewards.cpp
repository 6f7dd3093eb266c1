#include "qagent/rewards.hpp"

#include <algorithm>
#include <map>

#include "qagent/text.hpp"

namespace qagent {

GoldAnswerSet::GoldAnswerSet(std::vector<std::string> answers) : answers_(std::move(answers)) {
    if (answers_.empty()) throw InvalidArgument("gold answer set is empty");
    for (const auto& a : answers_) {
        if (normalize_answer(a).empty()) {
            throw InvalidArgument("gold answer \"" + a + "\" is empty after normalization");
        }
    }
}

namespace {

bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

std::vector<std::string> answer_tokens(std::string_view s) {
    return text::split_whitespace(normalize_answer(s));
}

}  // namespace

std::string normalize_answer(std::string_view input) {
    std::string lowered = text::to_lower(input);
    std::erase_if(lowered, is_ascii_punct);
    std::string out;
    for (const auto& word : text::split_whitespace(lowered)) {
        if (is_article(word)) continue;
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

int em_strict(std::string_view prediction, const GoldAnswerSet& gold) {
    const auto pred = normalize_answer(prediction);
    return std::any_of(gold.answers().begin(), gold.answers().end(),
                       [&](const std::string& g) { return normalize_answer(g) == pred; })
               ? 1
               : 0;
}

int em_contains(std::string_view prediction, const GoldAnswerSet& gold) {
    const auto pred = normalize_answer(prediction);
    return std::any_of(gold.answers().begin(), gold.answers().end(),
                       [&](const std::string& g) {
                           const auto needle = normalize_answer(g);
                           return !needle.empty() && pred.find(needle) != std::string::npos;
                       })
               ? 1
               : 0;
}

double token_f1(std::string_view prediction, const GoldAnswerSet& gold) {
    const auto pred = answer_tokens(prediction);
    if (pred.empty()) return 0.0;
    std::map<std::string, int> pred_counts;
    for (const auto& t : pred) ++pred_counts[t];

    double best = 0.0;
    for (const auto& g : gold.answers()) {
        const auto truth = answer_tokens(g);
        if (truth.empty()) continue;
        std::map<std::string, int> truth_counts;
        for (const auto& t : truth) ++truth_counts[t];
        int common = 0;
        for (const auto& [token, count] : pred_counts) {
            if (const auto it = truth_counts.find(token); it != truth_counts.end()) {
                common += std::min(count, it->second);
            }
        }
        if (common == 0) continue;
        const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
        const double recall = static_cast<double>(common) / static_cast<double>(truth.size());
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

int hit(const Trajectory& trajectory, const GoldAnswerSet& gold) {
    std::string flattened = trajectory.full_text;
    for (const auto tag : {protocol::Tag::plan, protocol::Tag::search, protocol::Tag::query,
                           protocol::Tag::information, protocol::Tag::reflection, protocol::Tag::answer}) {
        for (const auto& marker : {protocol::open_tag(tag), protocol::close_tag(tag)}) {
            for (auto pos = flattened.find(marker); pos != std::string::npos;
                 pos = flattened.find(marker, pos)) {
                flattened.replace(pos, marker.size(), " ");
            }
        }
    }
    return em_contains(flattened, gold);
}

double stage1_reward(const Trajectory& trajectory, const GoldAnswerSet& gold) {
    if (!trajectory.agent_answer) return 0.0;
    if (!protocol::validate_format(trajectory.full_text).valid()) return 0.0;
    return em_strict(*trajectory.agent_answer, gold);
}

double stage2_reward(const Trajectory& trajectory, std::string_view generator_answer,
                     const GoldAnswerSet& gold) {
    return em_contains(generator_answer, gold) + 0.5 * hit(trajectory, gold);
}

RewardBreakdown score_trajectory(const Trajectory& trajectory,
                                 const std::optional<std::string>& generator_answer,
                                 const GoldAnswerSet& gold) {
    RewardBreakdown r;
    r.format_ok = protocol::validate_format(trajectory.full_text).valid();
    if (trajectory.agent_answer) {
        r.em_strict = em_strict(*trajectory.agent_answer, gold);
        r.em_contains = em_contains(*trajectory.agent_answer, gold);
        r.f1 = token_f1(*trajectory.agent_answer, gold);
    }
    r.hit = hit(trajectory, gold);
    r.stage1 = stage1_reward(trajectory, gold);
    r.stage2 = generator_answer ? stage2_reward(trajectory, *generator_answer, gold) : 0.5 * r.hit;
    return r;
}

}  // namespace qagent
