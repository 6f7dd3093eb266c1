#include "qagent/trace.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "qagent/text.hpp"

namespace qagent {

namespace {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

template <typename T>
ojson optional_json(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

ojson passage_json(const Passage& p) {
    ojson j;
    j["id"] = p.doc_id;
    j["title"] = p.title;
    j["text"] = p.text;
    j["score"] = p.score;
    return j;
}

ojson passages_json(const std::vector<Passage>& passages) {
    ojson out = ojson::array();
    for (const Passage& p : passages) out.push_back(passage_json(p));
    return out;
}

ojson turn_json(const Turn& turn) {
    ojson j;
    j["segment"] = turn.raw_segment;
    j["plan"] = optional_json(turn.plan_text);
    if (turn.search) {
        ojson s;
        s["queries"] = turn.search->queries;
        s["violations"] = ojson::array();
        for (const auto& v : turn.search->violations) {
            s["violations"].push_back({{"position", v.position}, {"rule", v.rule}});
        }
        j["search"] = std::move(s);
    } else {
        j["search"] = nullptr;
    }
    if (turn.information) {
        ojson info;
        info["queries"] = turn.information->source_queries;
        info["passages"] = passages_json(turn.information->passages);
        j["information"] = std::move(info);
    } else {
        j["information"] = nullptr;
    }
    j["reflection"] = optional_json(turn.reflection_text);
    j["malformed"] = optional_json(turn.malformed_reason);
    j["retry_prompt"] = optional_json(turn.retry_prompt);
    return j;
}

ojson rewards_json(const RewardBreakdown& r) {
    ojson j;
    j["format_ok"] = r.format_ok;
    j["em_strict"] = r.em_strict;
    j["em_contains"] = r.em_contains;
    j["f1"] = r.f1;
    j["hit"] = r.hit;
    j["stage1"] = r.stage1;
    j["stage2"] = r.stage2;
    return j;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

Passage passage_from(const json& j) {
    Passage p;
    p.doc_id = j.at("id").get<std::string>();
    p.title = j.at("title").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.score = j.value("score", 0.0);
    return p;
}

std::vector<Passage> passages_from(const json& j) {
    std::vector<Passage> out;
    for (const auto& p : j) out.push_back(passage_from(p));
    return out;
}

Turn turn_from(const json& j) {
    Turn turn;
    turn.raw_segment = j.at("segment").get<std::string>();
    turn.plan_text = optional_string(j, "plan");
    if (j.contains("search") && !j.at("search").is_null()) {
        const auto& s = j.at("search");
        protocol::SearchAction action;
        action.queries = s.at("queries").get<std::vector<std::string>>();
        if (s.contains("violations")) {
            for (const auto& v : s.at("violations")) {
                action.violations.push_back({v.at("position").get<std::size_t>(), v.at("rule").get<std::string>()});
            }
        }
        turn.search = std::move(action);
    }
    if (j.contains("information") && !j.at("information").is_null()) {
        const auto& info = j.at("information");
        protocol::InformationBlock block;
        block.source_queries = info.at("queries").get<std::vector<std::string>>();
        block.passages = passages_from(info.at("passages"));
        turn.information = std::move(block);
    }
    turn.reflection_text = optional_string(j, "reflection");
    turn.malformed_reason = optional_string(j, "malformed");
    turn.retry_prompt = optional_string(j, "retry_prompt");
    return turn;
}

RewardBreakdown rewards_from(const json& j) {
    RewardBreakdown r;
    r.format_ok = j.at("format_ok").get<bool>();
    r.em_strict = j.at("em_strict").get<int>();
    r.em_contains = j.at("em_contains").get<int>();
    r.f1 = j.at("f1").get<double>();
    r.hit = j.at("hit").get<int>();
    r.stage1 = j.at("stage1").get<double>();
    r.stage2 = j.at("stage2").get<double>();
    return r;
}

bool same_passages(const std::vector<Passage>& a, const std::vector<Passage>& b, bool compare_ids) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].text != b[i].text || a[i].title != b[i].title) return false;
        if (compare_ids && a[i].doc_id != b[i].doc_id) return false;
    }
    return true;
}

}  // namespace

std::string trace_to_json_line(const TraceRecord& record) {
    const Trajectory& t = record.trajectory;
    ojson j;
    j["question"] = t.question;
    j["termination"] = std::string(to_string(t.termination));
    j["agent_answer"] = optional_json(t.agent_answer);
    j["generator_answer"] = optional_json(record.generator_answer);
    j["turns"] = ojson::array();
    for (const Turn& turn : t.turns) j["turns"].push_back(turn_json(turn));
    j["info_set"] = passages_json(t.info_set);
    j["full_text"] = t.full_text;
    j["sequence_tokens"] = t.sequence_tokens;
    j["gold"] = optional_json(record.gold);
    j["rewards"] = record.rewards ? rewards_json(*record.rewards) : ojson(nullptr);
    return j.dump();
}

TraceRecord trace_from_json_line(std::string_view line) {
    TraceRecord record;
    try {
        const auto j = json::parse(line);
        Trajectory& t = record.trajectory;
        t.question = j.at("question").get<std::string>();
        t.termination = termination_from_string(j.at("termination").get<std::string>());
        t.agent_answer = optional_string(j, "agent_answer");
        record.generator_answer = optional_string(j, "generator_answer");
        for (const auto& turn : j.at("turns")) t.turns.push_back(turn_from(turn));
        t.info_set = passages_from(j.at("info_set"));
        t.full_text = j.at("full_text").get<std::string>();
        t.sequence_tokens = j.value("sequence_tokens", std::size_t{0});
        if (j.contains("gold") && !j.at("gold").is_null()) {
            record.gold = j.at("gold").get<std::vector<std::string>>();
        }
        if (j.contains("rewards") && !j.at("rewards").is_null()) record.rewards = rewards_from(j.at("rewards"));
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
    return record;
}

void write_trace(const TraceRecord& record, std::ostream& out) {
    out << trace_to_json_line(record) << '\n';
    if (!out) throw IoError("failed to write trace record");
}

std::vector<TraceRecord> read_traces(std::istream& in) {
    std::vector<TraceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            records.push_back(trace_from_json_line(line));
        } catch (const ParseError& e) {
            throw ParseError("record " + std::to_string(records.size()) + " (line " + std::to_string(line_no) +
                                 "): " + e.what(),
                             line_no);
        }
    }
    return records;
}

TraceCheck validate_trace(const TraceRecord& record, std::optional<std::size_t> max_turns) {
    const Trajectory& t = record.trajectory;
    TraceCheck check;
    check.format = protocol::validate_format(t.full_text);
    auto& problems = check.problems;

    if ((t.termination == Termination::answered) != t.agent_answer.has_value()) {
        problems.push_back(t.agent_answer ? "agent answer present but termination is " +
                                                std::string(to_string(t.termination))
                                          : std::string("termination is answered but there is no agent answer"));
    }
    if (max_turns && t.turns.size() > *max_turns) {
        problems.push_back(std::to_string(t.turns.size()) + " turns exceed the limit of " +
                           std::to_string(*max_turns));
    }

    std::string rebuilt;
    for (std::size_t i = 0; i < t.turns.size(); ++i) {
        const Turn& turn = t.turns[i];
        const std::string where = "turn " + std::to_string(i) + ": ";
        rebuilt += turn.raw_segment;
        if (turn.search && !turn.information && t.termination != Termination::error) {
            problems.push_back(where + "search without information block");
        }
        if (turn.information) {
            if (!turn.search) problems.push_back(where + "information block without search");
            rebuilt += protocol::render_information(*turn.information);
        }
        if (turn.malformed_reason) {
            if (!turn.retry_prompt) problems.push_back(where + "malformed segment without retry prompt");
            else rebuilt += *turn.retry_prompt;
        }
    }
    if (rebuilt != t.full_text) problems.push_back("full_text does not match the turn segments");

    if (!same_passages(t.info_set, parse_doc_set(t), true)) {
        problems.push_back("passage set differs from the union of information blocks");
    }
    if (!same_passages(t.info_set, protocol::parse_doc_set(std::string_view(t.full_text)), false)) {
        problems.push_back("passage set differs from the passages rendered in full_text");
    }

    if (record.rewards && record.gold) {
        try {
            const GoldAnswerSet gold(*record.gold);
            if (score_trajectory(t, record.generator_answer, gold) != *record.rewards) {
                problems.push_back("stored rewards differ from recomputed rewards");
            }
        } catch (const InvalidArgument& e) {
            problems.push_back(std::string("gold answers: ") + e.what());
        }
    }
    return check;
}

}  // namespace qagent
