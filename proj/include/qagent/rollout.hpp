#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qagent/error.hpp"
#include "qagent/policy.hpp"
#include "qagent/protocol.hpp"
#include "qagent/retriever.hpp"

namespace qagent {

inline constexpr std::string_view kAgentPromptVersion = "agent-prompt-v1";
inline constexpr std::string_view kRetryPromptVersion = "retry-prompt-v1";
inline constexpr std::string_view kDefaultRetryPrompt =
    "\nYour previous output had invalid format. Continue, using <search>…</search> or "
    "<answer>…</answer>.\n";

struct RolloutConfig {
    std::size_t max_turns = 4;
    std::size_t passages_per_query = 1;
    std::string retry_prompt{kDefaultRetryPrompt};
    std::size_t max_total_tokens = 8192;
    std::size_t max_response_tokens = 512;
    double temperature = 1.0;
    double top_p = 1.0;

    void validate() const;
};

/// Instruction prompt placed ahead of the rollout text for every
/// generation call.
std::string render_agent_prompt(std::string_view question);

/// One action round: a generated segment and what it triggered.
struct Turn {
    std::string raw_segment;
    std::optional<std::string> plan_text;
    std::optional<protocol::SearchAction> search;
    std::optional<protocol::InformationBlock> information;
    std::optional<std::string> reflection_text;  // reflection on this turn's information
    std::optional<std::string> malformed_reason;  // set when a retry was requested
    std::optional<std::string> retry_prompt;      // text appended after a malformed segment
};

enum class Termination {
    answered,
    budget_exhausted,
    token_limit,
    policy_end,
    error,  // only on partial trajectories attached to EpisodeError
};

std::string_view to_string(Termination termination);
Termination termination_from_string(std::string_view name);

struct Trajectory {
    std::string question;
    std::vector<Turn> turns;
    std::optional<std::string> agent_answer;
    std::vector<Passage> info_set;  // K: deduplicated union of every block
    std::string full_text;          // segments, information blocks and retry prompts
    Termination termination = Termination::policy_end;
    std::size_t sequence_tokens = 0;

    std::vector<protocol::InformationBlock> information_blocks() const;
};

/// An episode failed mid-way; carries what had been produced so far.
class EpisodeError : public Error {
public:
    EpisodeError(const std::string& what, Trajectory partial)
        : Error(what), partial_(std::move(partial)) {}
    const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

/// Retrieves the top `passages_per_query` passages for each query, in query
/// order, and drops repeated passage texts. Throws RetrievalError naming the
/// failing query.
protocol::InformationBlock aggregate_context(std::span<const std::string> queries,
                                             const Retriever& retriever,
                                             std::size_t passages_per_query);

/// Runs the plan/search/information/reflect loop for one question until the
/// agent answers, the turn budget or token budget runs out, or the policy
/// stops producing text.
Trajectory run_episode(std::string_view question, const Policy& policy, const Retriever& retriever,
                       const RolloutConfig& config);

std::vector<Passage> parse_doc_set(const Trajectory& trajectory);

/// Asks the frozen generator to answer from the trajectory's passage set.
std::string finalize_with_generator(const Trajectory& trajectory, std::string_view question,
                                    const Generator& generator);

}  // namespace qagent
