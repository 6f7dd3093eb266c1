#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qagent/rollout.hpp"

namespace qagent {

/// Non-empty list of acceptable answers.
class GoldAnswerSet {
public:
    /// Throws InvalidArgument when the list is empty or an answer
    /// normalizes to nothing.
    explicit GoldAnswerSet(std::vector<std::string> answers);

    const std::vector<std::string>& answers() const noexcept { return answers_; }

private:
    std::vector<std::string> answers_;
};

/// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_answer(std::string_view text);

/// 1 when the normalized prediction equals some normalized gold answer.
int em_strict(std::string_view prediction, const GoldAnswerSet& gold);

/// 1 when some normalized gold answer is a substring of the normalized
/// prediction.
int em_contains(std::string_view prediction, const GoldAnswerSet& gold);

/// Best SQuAD-style token F1 over the gold answers.
double token_f1(std::string_view prediction, const GoldAnswerSet& gold);

/// 1 when some gold answer occurs anywhere in the trajectory text. Protocol
/// tags are blanked out first so they cannot glue onto neighbouring words.
int hit(const Trajectory& trajectory, const GoldAnswerSet& gold);

/// Format gate times strict EM of the agent's own answer.
double stage1_reward(const Trajectory& trajectory, const GoldAnswerSet& gold);

/// Containment EM of the frozen generator's answer plus 0.5 x hit.
double stage2_reward(const Trajectory& trajectory, std::string_view generator_answer,
                     const GoldAnswerSet& gold);

struct RewardBreakdown {
    bool format_ok = false;
    int em_strict = 0;
    int em_contains = 0;
    double f1 = 0.0;
    int hit = 0;
    double stage1 = 0.0;
    double stage2 = 0.0;

    bool operator==(const RewardBreakdown&) const = default;
};

/// EM and F1 fields score the agent answer; stage2 uses the generator answer
/// when one is given and counts only the hit term otherwise.
RewardBreakdown score_trajectory(const Trajectory& trajectory,
                                 const std::optional<std::string>& generator_answer,
                                 const GoldAnswerSet& gold);

}  // namespace qagent
