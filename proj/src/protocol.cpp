#include "qagent/protocol.hpp"

#include <algorithm>
#include <array>

#include "qagent/error.hpp"
#include "qagent/text.hpp"

namespace qagent::protocol {

namespace {

constexpr std::array kAllTags = {Tag::plan,        Tag::search,     Tag::query,
                                 Tag::information, Tag::reflection, Tag::answer};

struct TagToken {
    Tag tag;
    bool closing;
    std::size_t begin;
    std::size_t end;
};

std::vector<TagToken> lex(std::string_view text) {
    std::vector<TagToken> tokens;
    for (auto pos = text.find('<'); pos != std::string_view::npos; pos = text.find('<', pos + 1)) {
        const bool closing = pos + 1 < text.size() && text[pos + 1] == '/';
        const std::size_t name_begin = pos + (closing ? 2 : 1);
        for (Tag tag : kAllTags) {
            const auto name = tag_name(tag);
            if (text.compare(name_begin, name.size(), name) == 0 &&
                name_begin + name.size() < text.size() && text[name_begin + name.size()] == '>') {
                tokens.push_back({tag, closing, pos, name_begin + name.size() + 1});
                break;
            }
        }
    }
    return tokens;
}

std::string doc_header(std::size_t number) {
    return "Doc " + std::to_string(number) + " (Title: \"";
}

bool only_whitespace(std::string_view s) { return text::trim(s).empty(); }

}  // namespace

std::string_view tag_name(Tag tag) {
    switch (tag) {
        case Tag::plan: return "plan";
        case Tag::search: return "search";
        case Tag::query: return "query";
        case Tag::information: return "information";
        case Tag::reflection: return "reflection";
        case Tag::answer: return "answer";
    }
    return "";
}

std::string open_tag(Tag tag) { return "<" + std::string(tag_name(tag)) + ">"; }
std::string close_tag(Tag tag) { return "</" + std::string(tag_name(tag)) + ">"; }

QueryList extract_queries(std::string_view interior) {
    QueryList out;
    const auto tokens = lex(interior);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TagToken& open = tokens[i];
        if (open.tag != Tag::query || open.closing) continue;
        if (i + 1 >= tokens.size() || tokens[i + 1].tag != Tag::query || !tokens[i + 1].closing) {
            continue;  // scan() reports the structural problem
        }
        const TagToken& close = tokens[i + 1];
        const auto query = text::trim(interior.substr(open.end, close.begin - open.end));
        if (query.empty()) {
            out.violations.push_back({open.begin, "empty-query"});
        } else if (out.queries.size() == kMaxQueriesPerSearch) {
            if (out.violations.empty() || out.violations.back().rule != "too-many-queries") {
                out.violations.push_back({open.begin, "too-many-queries"});
            }
        } else {
            out.queries.emplace_back(query);
        }
        ++i;
    }
    if (out.queries.empty()) throw ParseError("empty search");
    return out;
}

AgentAction parse_segment(std::string_view segment) {
    if (const auto close = segment.find(close_tag(Tag::search)); close != std::string_view::npos) {
        const auto open = segment.rfind(open_tag(Tag::search), close);
        if (open == std::string_view::npos) return MalformedAction{"search closed without opening tag"};
        const auto begin = open + open_tag(Tag::search).size();
        try {
            auto queries = extract_queries(segment.substr(begin, close - begin));
            for (auto& v : queries.violations) v.position += begin;
            return SearchAction{std::move(queries.queries), std::move(queries.violations)};
        } catch (const ParseError&) {
            return MalformedAction{"empty search"};
        }
    }
    if (const auto close = segment.find(close_tag(Tag::answer)); close != std::string_view::npos) {
        const auto open = segment.rfind(open_tag(Tag::answer), close);
        if (open == std::string_view::npos) return MalformedAction{"answer closed without opening tag"};
        const auto begin = open + open_tag(Tag::answer).size();
        const auto answer = text::trim(segment.substr(begin, close - begin));
        if (answer.empty()) return MalformedAction{"empty answer"};
        return AnswerAction{std::string(answer)};
    }
    return MalformedAction{"no terminal tag"};
}

std::string render_information(const InformationBlock& block) {
    std::string out = open_tag(Tag::information) + "\n";
    if (block.passages.empty()) {
        out += kNoResults;
    }
    for (std::size_t i = 0; i < block.passages.size(); ++i) {
        if (i > 0) out += "\n\n";
        const Passage& p = block.passages[i];
        out += doc_header(i + 1);
        out += p.title;
        out += "\") ";
        out += p.text;
    }
    out += "\n" + close_tag(Tag::information);
    return out;
}

std::vector<Passage> parse_information(std::string_view rendered) {
    std::string_view body = rendered;
    const std::string open = open_tag(Tag::information);
    const std::string close = close_tag(Tag::information);
    if (body.starts_with(open)) {
        body.remove_prefix(open.size());
        if (body.starts_with('\n')) body.remove_prefix(1);
    }
    if (body.ends_with(close)) {
        body.remove_suffix(close.size());
        if (body.ends_with('\n')) body.remove_suffix(1);
    }
    if (text::trim(body) == kNoResults || only_whitespace(body)) return {};

    std::vector<Passage> passages;
    std::size_t pos = 0;
    for (std::size_t number = 1;; ++number) {
        const std::string header = doc_header(number);
        if (body.compare(pos, header.size(), header) != 0) {
            throw ParseError("information block: expected \"" + header + "\" at offset " +
                             std::to_string(pos));
        }
        pos += header.size();
        const auto title_end = body.find("\") ", pos);
        if (title_end == std::string_view::npos) {
            throw ParseError("information block: unterminated title for Doc " + std::to_string(number));
        }
        Passage p;
        p.title = std::string(body.substr(pos, title_end - pos));
        pos = title_end + 3;
        const auto next = body.find("\n\n" + doc_header(number + 1), pos);
        const auto text_end = next == std::string_view::npos ? body.size() : next;
        p.text = std::string(body.substr(pos, text_end - pos));
        passages.push_back(std::move(p));
        if (next == std::string_view::npos) break;
        pos = next + 2;
    }
    return passages;
}

ScanResult scan(std::string_view text) {
    ScanResult out;
    const auto tokens = lex(text);
    const std::size_t n = tokens.size();
    std::size_t i = 0;
    while (i < n) {
        const TagToken& t = tokens[i];
        if (t.closing) {
            out.violations.push_back({t.begin, "unmatched-close"});
            ++i;
            continue;
        }
        if (t.tag == Tag::query) {
            out.violations.push_back({t.begin, "query-outside-search"});
            ++i;
            if (i < n && tokens[i].tag == Tag::query && tokens[i].closing) ++i;
            continue;
        }

        Element e{t.tag, t.begin, t.end};
        std::size_t j = i + 1;
        const auto is_close = [&](std::size_t k) { return tokens[k].closing && tokens[k].tag == t.tag; };
        if (t.tag == Tag::search) {
            bool in_query = false;
            for (; j < n && !is_close(j); ++j) {
                const TagToken& inner = tokens[j];
                if (inner.tag != Tag::query) {
                    out.violations.push_back({inner.begin, "nested-tag"});
                } else if (!inner.closing) {
                    if (in_query) out.violations.push_back({inner.begin, "nested-tag"});
                    in_query = true;
                } else {
                    if (!in_query) out.violations.push_back({inner.begin, "unmatched-close"});
                    in_query = false;
                }
            }
            if (in_query) {
                out.violations.push_back({j < n ? tokens[j].begin : text.size(), "unclosed-tag"});
            }
        } else {
            for (; j < n && !is_close(j); ++j) {
                // retrieved passages are not policy output; only flag nesting
                // inside elements the policy writes
                if (t.tag != Tag::information) out.violations.push_back({tokens[j].begin, "nested-tag"});
            }
        }

        if (j < n) {
            e.content_end = tokens[j].begin;
            e.end = tokens[j].end;
            e.closed = true;
            i = j + 1;
        } else {
            e.content_end = e.end = text.size();
            out.violations.push_back({t.begin, "unclosed-tag"});
            i = n;
        }
        out.elements.push_back(e);
    }
    return out;
}

FormatReport validate_format(std::string_view text) {
    ScanResult scanned = scan(text);
    FormatReport report;
    auto& v = report.violations;
    v = std::move(scanned.violations);
    const auto& elems = scanned.elements;

    std::size_t answers = 0;
    for (std::size_t i = 0; i < elems.size(); ++i) {
        const Element& e = elems[i];
        switch (e.tag) {
            case Tag::search: {
                if (i == 0 || elems[i - 1].tag != Tag::plan || !elems[i - 1].closed) {
                    v.push_back({e.begin, "missing-plan"});
                }
                if (!e.closed) break;
                try {
                    auto queries = extract_queries(e.content(text));
                    for (auto& q : queries.violations) {
                        v.push_back({q.position + e.content_begin, q.rule});
                    }
                } catch (const ParseError&) {
                    v.push_back({e.begin, "empty-search"});
                }
                break;
            }
            case Tag::information:
                if (i + 1 >= elems.size() || elems[i + 1].tag != Tag::reflection || !elems[i + 1].closed) {
                    v.push_back({e.end, "missing-reflection"});
                }
                break;
            case Tag::answer:
                if (++answers > 1) {
                    v.push_back({e.begin, "multiple-answers"});
                } else if (i + 1 != elems.size()) {
                    v.push_back({e.begin, "answer-not-last"});
                }
                if (i + 1 == elems.size() && e.closed && !only_whitespace(text.substr(e.end))) {
                    v.push_back({e.end, "text-after-answer"});
                }
                break;
            default:
                break;
        }
    }
    if (answers == 0) v.push_back({text.size(), "missing-answer"});

    std::stable_sort(v.begin(), v.end(),
                     [](const Violation& a, const Violation& b) { return a.position < b.position; });
    return report;
}

std::vector<std::pair<std::size_t, std::size_t>> information_spans(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const Element& e : scan(text).elements) {
        if (e.tag == Tag::information && e.closed) spans.emplace_back(e.begin, e.end);
    }
    return spans;
}

bool PassageSet::add(const Passage& passage) {
    if (!keys_.insert(text::passage_key(passage.text)).second) return false;
    passages_.push_back(passage);
    return true;
}

std::vector<Passage> dedup_passages(std::span<const Passage> passages) {
    PassageSet set;
    for (const Passage& p : passages) set.add(p);
    return std::move(set).release();
}

std::vector<Passage> parse_doc_set(std::span<const InformationBlock> blocks) {
    PassageSet set;
    for (const InformationBlock& block : blocks) {
        for (const Passage& p : block.passages) set.add(p);
    }
    return std::move(set).release();
}

std::vector<Passage> parse_doc_set(std::string_view trajectory_text) {
    PassageSet set;
    for (const auto& [begin, end] : information_spans(trajectory_text)) {
        for (const Passage& p : parse_information(trajectory_text.substr(begin, end - begin))) {
            set.add(p);
        }
    }
    return std::move(set).release();
}

}  // namespace qagent::protocol
