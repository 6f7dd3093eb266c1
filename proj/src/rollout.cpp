#include "qagent/rollout.hpp"

#include <array>

#include "qagent/text.hpp"

namespace qagent {

void RolloutConfig::validate() const {
    if (max_turns == 0) throw InvalidArgument("max_turns must be at least 1");
    if (passages_per_query == 0) throw InvalidArgument("passages_per_query must be at least 1");
    if (max_total_tokens == 0) throw InvalidArgument("max_total_tokens must be positive");
    if (max_response_tokens == 0) throw InvalidArgument("max_response_tokens must be positive");
}

std::string render_agent_prompt(std::string_view question) {
    std::string prompt =
        "Answer the question below by searching for the information you need. Work in rounds.\n"
        "Each round, first write your plan inside <plan> </plan>. Then issue up to 3 search queries:\n"
        "<search>\n<query>first query</query>\n<query>second query</query>\n</search>\n"
        "The results will be returned inside <information> </information>. Read them and write your "
        "reflection on what is still missing inside <reflection> </reflection>.\n"
        "Start a new round with <plan> if you need more information. When you know enough, give the "
        "final answer, a few words only, inside <answer> </answer>, for example:\n"
        "<answer>\nParis\n</answer>\n\n"
        "Question: ";
    prompt += question;
    prompt += "\n";
    return prompt;
}

std::string_view to_string(Termination termination) {
    switch (termination) {
        case Termination::answered: return "answered";
        case Termination::budget_exhausted: return "budget_exhausted";
        case Termination::token_limit: return "token_limit";
        case Termination::policy_end: return "policy_end";
        case Termination::error: return "error";
    }
    return "error";
}

Termination termination_from_string(std::string_view name) {
    constexpr std::array all = {Termination::answered, Termination::budget_exhausted,
                                Termination::token_limit, Termination::policy_end, Termination::error};
    for (auto t : all) {
        if (to_string(t) == name) return t;
    }
    throw ParseError("unknown termination \"" + std::string(name) + "\"");
}

std::vector<protocol::InformationBlock> Trajectory::information_blocks() const {
    std::vector<protocol::InformationBlock> blocks;
    for (const Turn& turn : turns) {
        if (turn.information) blocks.push_back(*turn.information);
    }
    return blocks;
}

protocol::InformationBlock aggregate_context(std::span<const std::string> queries,
                                             const Retriever& retriever,
                                             std::size_t passages_per_query) {
    if (queries.empty() || queries.size() > protocol::kMaxQueriesPerSearch) {
        throw InvalidArgument("aggregate_context takes 1 to 3 queries, got " +
                              std::to_string(queries.size()));
    }
    protocol::InformationBlock block;
    protocol::PassageSet passages;
    for (const auto& query : queries) {
        std::vector<Passage> hits;
        try {
            hits = retriever.search(query, passages_per_query);
        } catch (const Error& e) {
            throw RetrievalError("retrieval failed for query \"" + query + "\": " + e.what(), query);
        }
        for (const Passage& p : hits) passages.add(p);
        block.source_queries.push_back(query);
    }
    block.passages = std::move(passages).release();
    return block;
}

namespace {

/// Copies plan and reflection text from a segment into the turn record. A
/// reflection that opens the segment reflects on the previous turn's
/// information.
void record_reasoning(std::string_view segment, Turn& current, Turn* previous) {
    bool seen_action = false;
    const auto scanned = protocol::scan(segment);
    for (const auto& e : scanned.elements) {
        const std::string content(text::trim(e.content(segment)));
        switch (e.tag) {
            case protocol::Tag::plan:
                current.plan_text = content;
                seen_action = true;
                break;
            case protocol::Tag::reflection:
                if (!seen_action && previous && previous->information && !previous->reflection_text) {
                    previous->reflection_text = content;
                } else {
                    current.reflection_text = content;
                }
                break;
            default:
                seen_action = true;
                break;
        }
    }
}

}  // namespace

Trajectory run_episode(std::string_view question, const Policy& policy, const Retriever& retriever,
                       const RolloutConfig& config) {
    config.validate();
    if (text::trim(question).empty()) throw InvalidArgument("question is empty");

    Trajectory traj;
    traj.question = std::string(question);
    const std::string prompt_head = render_agent_prompt(question);
    auto session = policy.start_episode(question);
    protocol::PassageSet info_set;

    const auto fail = [&](const std::string& what) {
        traj.termination = Termination::error;
        traj.info_set = info_set.passages();
        throw EpisodeError(what, std::move(traj));
    };

    GenerationRequest request;
    request.stop = {"</search>", "</answer>"};
    request.max_tokens = config.max_response_tokens;
    request.temperature = config.temperature;
    request.top_p = config.top_p;

    bool answered = false;
    bool ended = false;
    bool over_budget = false;
    for (std::size_t round = 0; round < config.max_turns; ++round) {
        request.prompt = prompt_head + traj.full_text;
        GenerationChunk chunk;
        try {
            chunk = session->generate(request);
        } catch (const Error& e) {
            fail(std::string("policy failed: ") + e.what());
        }
        if (chunk.finish_reason == FinishReason::end && chunk.text.empty()) {
            ended = true;
            break;
        }

        // Sequence length: the server's count when reported, else an estimate.
        std::size_t sequence_tokens =
            chunk.prompt_tokens && chunk.completion_tokens
                ? *chunk.prompt_tokens + *chunk.completion_tokens
                : text::estimate_tokens(request.prompt) + text::estimate_tokens(chunk.text);

        traj.full_text += chunk.text;
        Turn turn;
        turn.raw_segment = chunk.text;
        record_reasoning(chunk.text, turn, traj.turns.empty() ? nullptr : &traj.turns.back());

        auto action = protocol::parse_segment(chunk.text);
        if (auto* search = std::get_if<protocol::SearchAction>(&action)) {
            turn.search = *search;
            try {
                turn.information = aggregate_context(search->queries, retriever, config.passages_per_query);
            } catch (const RetrievalError& e) {
                traj.turns.push_back(std::move(turn));
                fail(e.what());
            }
            const std::string rendered = protocol::render_information(*turn.information);
            traj.full_text += rendered;
            sequence_tokens += text::estimate_tokens(rendered);
            for (const Passage& p : turn.information->passages) info_set.add(p);
        } else if (auto* answer = std::get_if<protocol::AnswerAction>(&action)) {
            traj.agent_answer = answer->text;
            answered = true;
        } else {
            turn.malformed_reason = std::get<protocol::MalformedAction>(action).reason;
            turn.retry_prompt = config.retry_prompt;
            traj.full_text += config.retry_prompt;
            sequence_tokens += text::estimate_tokens(config.retry_prompt);
        }
        traj.turns.push_back(std::move(turn));
        traj.sequence_tokens = sequence_tokens;

        if (answered) break;
        if (sequence_tokens >= config.max_total_tokens) {
            over_budget = true;
            break;
        }
    }

    if (answered) {
        traj.termination = Termination::answered;
    } else if (ended) {
        traj.termination = Termination::policy_end;
    } else if (over_budget) {
        traj.termination = Termination::token_limit;
    } else {
        traj.termination = Termination::budget_exhausted;
    }
    traj.info_set = std::move(info_set).release();
    return traj;
}

std::vector<Passage> parse_doc_set(const Trajectory& trajectory) {
    return protocol::parse_doc_set(trajectory.information_blocks());
}

std::string finalize_with_generator(const Trajectory& trajectory, std::string_view question,
                                    const Generator& generator) {
    return frozen_generate(generator, question, trajectory.info_set);
}

}  // namespace qagent
