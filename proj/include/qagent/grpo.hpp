#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qagent/retriever.hpp"  // Execution

// Group-relative policy optimization objective, evaluated over recorded
// per-token log-probabilities. Nothing here computes gradients.
namespace qagent::grpo {

struct TokenTrace {
    std::vector<std::string> tokens;
    std::vector<double> logp_new;   // current policy
    std::vector<double> logp_old;   // policy that sampled the rollout
    std::optional<std::vector<double>> logp_ref;  // reference policy for the KL term
    std::vector<bool> mask;         // true = token counts toward the objective

    /// Throws InvalidArgument naming the first stream whose length differs
    /// from tokens.
    void validate() const;
    std::size_t unmasked() const;
};

struct GroupTrace {
    std::string question_id;
    std::vector<TokenTrace> rollouts;
    std::vector<double> rewards;

    /// Requires at least two rollouts, one reward per rollout and
    /// internally consistent traces.
    void validate() const;
};

struct GrpoParams {
    double epsilon = 0.2;
    double beta = 0.001;
    double sigma_floor = 1e-8;

    void validate() const;
};

/// (r - mean) / population std; all zeros when std < sigma_floor.
std::vector<double> group_advantages(std::span<const double> rewards, double sigma_floor = 1e-8);

/// false for every token whose [begin, end) character span lies inside a
/// well-formed <information> element, true otherwise. Offsets must tile
/// `full_text` exactly, in order.
std::vector<bool> information_mask(std::string_view full_text,
                                   std::span<const std::pair<std::size_t, std::size_t>> token_offsets);

struct KlEstimate {
    double value = 0.0;
    std::size_t tokens = 0;  // unmasked tokens averaged over
};

/// Mean over unmasked tokens of exp(d) - d - 1 with d = logp_ref - logp_new.
/// Throws InvalidArgument when the trace has no reference stream.
KlEstimate kl_estimate(const TokenTrace& trace);

struct ObjectiveResult {
    double objective = 0.0;
    double surrogate = 0.0;     // clipped term averaged over unmasked tokens
    double kl = 0.0;            // per-token KL over unmasked tokens of the group
    double clip_fraction = 0.0; // share of unmasked tokens with |ratio - 1| > epsilon
    double mean_ratio = 0.0;
    std::size_t unmasked_tokens = 0;
    std::vector<std::string> notes;
};

/// Clipped, importance-weighted surrogate averaged over every unmasked token
/// in the group, minus beta times the KL estimate. Masked tokens affect
/// neither sum nor denominator.
ObjectiveResult grpo_objective(const GroupTrace& group, std::span<const double> advantages,
                               const GrpoParams& params);

struct GroupReport {
    std::string question_id;
    std::vector<double> advantages;
    ObjectiveResult result;
};

/// Advantages and objective for many groups; groups are independent, so the
/// parallel path hands each one to a different thread.
std::vector<GroupReport> evaluate_groups(std::span<const GroupTrace> groups, const GrpoParams& params,
                                         Execution execution = Execution::parallel);

/// JSON lines, one group per line:
///   {"question_id": ..., "rollouts": [{"tokens": [...], "logp_new": [...],
///    "logp_old": [...], "logp_ref": [...], "mask": [...], "reward": r}, ...]}
/// Throws ParseError naming the record (and rollout) that failed.
std::vector<GroupTrace> read_group_traces(std::istream& in);
void write_group_trace(const GroupTrace& group, std::ostream& out);

}  // namespace qagent::grpo
