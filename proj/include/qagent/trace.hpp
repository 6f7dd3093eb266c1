#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qagent/rewards.hpp"
#include "qagent/rollout.hpp"

namespace qagent {

/// One episode as stored in a trace file (JSON lines).
struct TraceRecord {
    Trajectory trajectory;
    std::optional<std::string> generator_answer;
    std::optional<std::vector<std::string>> gold;
    std::optional<RewardBreakdown> rewards;
};

/// Single-line JSON with a fixed key order, so equal records give equal bytes.
std::string trace_to_json_line(const TraceRecord& record);
TraceRecord trace_from_json_line(std::string_view line);

void write_trace(const TraceRecord& record, std::ostream& out);

/// Throws ParseError naming the record and line on malformed input.
std::vector<TraceRecord> read_traces(std::istream& in);

struct TraceCheck {
    std::vector<std::string> problems;  // structural inconsistencies
    protocol::FormatReport format;      // tag-protocol validity of full_text

    bool consistent() const noexcept { return problems.empty(); }
};

/// Cross-checks a record: termination vs answer, turn budget, passage set
/// vs information blocks, and full_text vs the turn segments.
TraceCheck validate_trace(const TraceRecord& record, std::optional<std::size_t> max_turns = std::nullopt);

}  // namespace qagent
