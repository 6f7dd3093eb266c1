#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "qagent/passage.hpp"

// The agent's tag language:
//   <plan> <search> <query> <information> <reflection> <answer>
// lowercase, no attributes, closed by the matching </tag>.
namespace qagent::protocol {

enum class Tag { plan, search, query, information, reflection, answer };

std::string_view tag_name(Tag tag);
std::string open_tag(Tag tag);
std::string close_tag(Tag tag);

inline constexpr std::size_t kMaxQueriesPerSearch = 3;
inline constexpr std::string_view kNoResults = "No results found.";

struct Violation {
    std::size_t position = 0;  // byte offset into the checked text
    std::string rule;

    bool operator==(const Violation&) const = default;
};

struct SearchAction {
    std::vector<std::string> queries;
    std::vector<Violation> violations;  // e.g. queries dropped past the cap
};

struct AnswerAction {
    std::string text;
};

struct MalformedAction {
    std::string reason;
};

using AgentAction = std::variant<SearchAction, AnswerAction, MalformedAction>;

/// Classifies one generated segment. A closed search element wins over a
/// closed answer element; anything else is Malformed.
AgentAction parse_segment(std::string_view segment);

struct QueryList {
    std::vector<std::string> queries;
    std::vector<Violation> violations;
};

/// Pulls the <query> children out of a search element's interior. Text
/// between queries is ignored, blank queries are skipped and at most
/// kMaxQueriesPerSearch are kept. Throws ParseError("empty search") when no
/// usable query remains.
QueryList extract_queries(std::string_view search_interior);

struct InformationBlock {
    std::vector<Passage> passages;
    std::vector<std::string> source_queries;
};

/// <information>
/// Doc 1 (Title: "...") text
///
/// Doc 2 (Title: "...") text
/// </information>
std::string render_information(const InformationBlock& block);

/// Inverse of render_information for the passage titles and texts. Accepts
/// the whole element or just its interior.
std::vector<Passage> parse_information(std::string_view rendered);

/// A top-level element located by scan().
struct Element {
    Tag tag;
    std::size_t begin = 0;          // offset of '<' of the opening tag
    std::size_t content_begin = 0;
    std::size_t content_end = 0;    // offset of the closing tag, or text end
    std::size_t end = 0;            // one past the closing tag
    bool closed = false;

    std::string_view content(std::string_view text) const {
        return text.substr(content_begin, content_end - content_begin);
    }
};

struct ScanResult {
    std::vector<Element> elements;
    std::vector<Violation> violations;  // nesting and closure problems
};

/// Splits text into top-level elements. Content of plan, reflection, answer
/// and information runs to the first matching close tag; search content may
/// only hold query elements.
ScanResult scan(std::string_view text);

struct FormatReport {
    std::vector<Violation> violations;

    bool valid() const noexcept { return violations.empty(); }
};

/// Checks a whole rollout: every search directly follows a closed plan,
/// every information block is directly followed by a closed reflection,
/// exactly one answer closes the transcript, and tags nest and close.
FormatReport validate_format(std::string_view trajectory_text);

/// Character spans [begin, end) of the well-formed top-level information
/// elements, tags included.
std::vector<std::pair<std::size_t, std::size_t>> information_spans(std::string_view text);

/// Order-preserving passage set keyed by whitespace-collapsed, case-folded text.
class PassageSet {
public:
    /// Returns false when an equal passage was already present.
    bool add(const Passage& passage);
    const std::vector<Passage>& passages() const noexcept { return passages_; }
    std::vector<Passage> release() && { return std::move(passages_); }

private:
    std::vector<Passage> passages_;
    std::unordered_set<std::string> keys_;
};

std::vector<Passage> dedup_passages(std::span<const Passage> passages);

/// Union of all blocks' passages in first-occurrence order, deduplicated.
std::vector<Passage> parse_doc_set(std::span<const InformationBlock> blocks);

/// Same, recovered from rendered transcript text (doc ids are not rendered,
/// so they come back empty).
std::vector<Passage> parse_doc_set(std::string_view trajectory_text);

}  // namespace qagent::protocol
