// Prints one PASS/FAIL line per acceptance criterion and exits nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bm25_oracle.hpp"
#include "cli.hpp"
#include "paths.hpp"
#include "properties.hpp"
#include "qagent/completion_client.hpp"
#include "qagent/corpus.hpp"
#include "qagent/evalharness.hpp"
#include "qagent/grpo.hpp"
#include "qagent/log.hpp"
#include "qagent/retriever.hpp"
#include "qagent/rewards.hpp"
#include "qagent/rollout.hpp"
#include "squad_reference.hpp"
#include "stub_server.hpp"

using namespace qagent;
using qtest::data_path;

namespace {

// Collects the first few problems of a criterion.
class Problems {
public:
    void add(std::string p) {
        ++count_;
        if (items_.size() < 5) items_.push_back(std::move(p));
    }
    void add_all(const qtest::props::Failures& fs) {
        for (const auto& f : fs) add(f);
    }
    bool empty() const { return count_ == 0; }
    std::string summary() const {
        std::string s = std::to_string(count_) + " problem(s)";
        for (const auto& i : items_) s += "; " + i;
        return s;
    }

private:
    std::size_t count_ = 0;
    std::vector<std::string> items_;
};

std::vector<std::string> ids(const std::vector<Passage>& ps) {
    std::vector<std::string> out;
    for (const auto& p : ps) out.push_back(p.doc_id);
    return out;
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err, [](const char*) { return std::optional<std::string>(); });
    return {code, out.str(), err.str()};
}

// 1. Inverted-index BM25 against exhaustive scoring.
void bm25_oracle(Problems& problems) {
    std::mt19937 rng(20240601);
    const std::vector<std::string> vocab{"river", "mountain", "River", "city", "capital", "france", "paris",
                                         "war", "peace", "novel", "author", "film", "1990", "music", "band",
                                         "rock", "king", "queen", "empire", "ocean", "island", "bridge"};
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto words = [&](std::size_t lo, std::size_t hi) {
        std::string s;
        const std::size_t n = lo + pick(hi - lo + 1);
        for (std::size_t i = 0; i < n; ++i) s += (i ? (pick(5) == 0 ? ", " : " ") : "") + vocab[pick(vocab.size())];
        return s;
    };
    for (int c = 0; c < 20; ++c) {
        std::vector<Document> docs;
        const std::size_t n = 1 + pick(100);
        for (std::size_t d = 0; d < n; ++d) docs.push_back({"c" + std::to_string(c) + "d" + std::to_string(d), words(0, 3), words(1, 40)});
        const Corpus corpus(docs);
        std::vector<std::string> oracle_docs;
        for (const auto& d : docs) oracle_docs.push_back(d.title + " " + d.text);
        const qtest::BruteForceBm25 oracle(oracle_docs);
        const auto index = build_index(corpus);
        if (std::abs(index.avg_doc_length() - oracle.avg_length()) > 1e-12) problems.add("corpus " + std::to_string(c) + ": avgdl");

        std::vector<std::string> queries;
        const std::size_t nq = 1 + pick(30);
        for (std::size_t q = 0; q < nq; ++q) queries.push_back(words(1, 4) + (pick(4) == 0 ? " unseen" : ""));
        const std::size_t k = 1 + pick(15);
        const auto batch = retrieve_batch(index, queries, k);
        const auto serial = retrieve_batch(index, queries, k, Execution::serial);
        for (std::size_t q = 0; q < nq; ++q) {
            const std::string where = "corpus " + std::to_string(c) + " query \"" + queries[q] + "\"";
            const auto expected = oracle.top_k(queries[q], k);
            const auto& got = batch[q];
            if (got.size() != expected.size()) {
                problems.add(where + ": " + std::to_string(got.size()) + " hits, oracle " + std::to_string(expected.size()));
                continue;
            }
            for (std::size_t i = 0; i < got.size(); ++i) {
                if (got[i].ordinal != expected[i].ordinal || got[i].doc_id != docs[expected[i].ordinal].id ||
                    std::abs(got[i].score - expected[i].score) > 1e-9 || got[i].rank != i + 1) {
                    problems.add(where + ": rank " + std::to_string(i + 1) + " differs");
                    break;
                }
            }
            if (serial[q].size() != got.size()) problems.add(where + ": serial and parallel differ");
            for (std::size_t i = 0; i < serial[q].size() && i < got.size(); ++i) {
                if (serial[q][i].ordinal != got[i].ordinal || serial[q][i].score != got[i].score) {
                    problems.add(where + ": serial and parallel differ");
                    break;
                }
            }
        }
    }
}

// 2. Hand-written metric cases against the reference implementation.
void metric_oracle(Problems& problems) {
    struct Case {
        std::string pred;
        std::vector<std::string> golds;
    };
    const std::vector<Case> cases{
        {"Paris", {"Paris"}},
        {"paris", {"PARIS"}},
        {"The Paris", {"Paris"}},
        {"in Paris, France", {"Paris"}},
        {"Parisian", {"Paris"}},
        {"barack obama", {"obama"}},
        {"Barack Hussein Obama", {"Barack Obama"}},
        {"obama", {"barack obama"}},
        {"Neil Armstrong", {"neil armstrong", "armstrong"}},
        {"", {"x"}},
        {"   ", {"x"}},
        {"the", {"a the b"}},
        {"a b c", {"b"}},
        {"theater", {"theater"}},
        {"the theater", {"theater"}},
        {"an apple", {"apple"}},
        {"An Apple a day", {"apple day"}},
        {"Rock 'n' Roll", {"rock n roll"}},
        {"rock-n-roll", {"rock n roll"}},
        {"rock-n-roll", {"rocknroll"}},
        {"U.S.A.", {"usa"}},
        {"U.S. Army", {"us army"}},
        {"1,000,000", {"1000000"}},
        {"$5", {"5"}},
        {"50%", {"50"}},
        {"x x y", {"x y y"}},
        {"x x x", {"x"}},
        {"x", {"x x x"}},
        {"Leonardo da Vinci", {"Leonardo da Vinci"}},
        {"Raphael da Urbino", {"Leonardo da Vinci"}},
        {"da Vinci", {"Leonardo da Vinci", "Da Vinci"}},
        {"Sir Alexander Fleming", {"Alexander Fleming"}},
        {"Au", {"au"}},
        {"gold (Au)", {"Au"}},
        {"Canberra.", {"canberra"}},
        {"Sydney", {"Canberra"}},
        {"William Shakespeare", {"Shakespeare", "William Shakespeare"}},
        {"shakes peare", {"shakespeare"}},
        {"A", {"a b"}},
        {"a", {"the a"}},
        {"the the the", {"the"}},
        {"Mount   Everest", {"mount everest"}},
        {"Mount\tEverest\n", {"mount everest"}},
        {"everest mount", {"mount everest"}},
        {"The Beatles", {"Beatles", "the fab four"}},
        {"fab four", {"the fab four"}},
        {"1969", {"July 1969"}},
        {"July 20, 1969", {"1969"}},
        {"H2O", {"h2o"}},
        {"water (H2O)", {"H2O", "water"}},
    };
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        bool usable = true;
        for (const auto& g : c.golds) usable = usable && !qtest::ref::normalize(g).empty();
        if (!usable) continue;
        const GoldAnswerSet gold(c.golds);
        const std::string where = "case " + std::to_string(i) + " \"" + c.pred + "\"";
        if (normalize_answer(c.pred) != qtest::ref::normalize(c.pred)) problems.add(where + ": normalize");
        if (em_strict(c.pred, gold) != qtest::ref::em_strict(c.pred, c.golds)) problems.add(where + ": em_strict");
        if (em_contains(c.pred, gold) != qtest::ref::em_contains(c.pred, c.golds)) problems.add(where + ": em_contains");
        if (token_f1(c.pred, gold) != qtest::ref::f1(c.pred, c.golds)) problems.add(where + ": token_f1");
        Trajectory t;
        t.full_text = "<plan>" + c.pred + "</plan><answer>" + c.golds.front() + "x</answer>";
        if (hit(t, gold) != qtest::ref::hit(t.full_text, c.golds)) problems.add(where + ": hit");
    }
    if (token_f1("barack obama", GoldAnswerSet({"obama"})) != 2.0 / 3.0) problems.add("2/3 F1 case");
    if (qtest::ref::f1("barack obama", {"obama"}) != 2.0 / 3.0) problems.add("2/3 F1 case (reference)");
}

// 3. Golden rollouts.
void golden_rollouts(Problems& problems) {
    const auto corpus = std::make_shared<const Corpus>(load_corpus(data_path("toy_corpus.jsonl")));
    const auto index = std::make_shared<const Bm25Index>(build_index(*corpus));
    const Bm25Retriever retriever(corpus, index);
    for (const char* name : {"answer_path", "retry_path", "budget_exhausted", "multi_query_dedup", "empty_retrieval"}) {
        const auto fx = nlohmann::json::parse(qtest::read_file(data_path(std::string("golden/") + name + ".json")));
        const ScriptedPolicy policy(fx["script"].get<std::vector<std::string>>());
        RolloutConfig config;
        config.max_turns = fx["max_turns"].get<std::size_t>();
        config.passages_per_query = fx["passages_per_query"].get<std::size_t>();
        const auto t = run_episode(fx["question"].get<std::string>(), policy, retriever, config);
        const auto& ex = fx["expected"];
        if (t.full_text != ex["full_text"].get<std::string>()) problems.add(std::string(name) + ": full_text");
        if (ids(t.info_set) != ex["info_set"].get<std::vector<std::string>>()) problems.add(std::string(name) + ": K");
        if (to_string(t.termination) != ex["termination"].get<std::string>()) problems.add(std::string(name) + ": termination");
        if (t.turns.size() != ex["turns"].get<std::size_t>()) problems.add(std::string(name) + ": turn count");
    }
}

// 4. Every combination of format, generator answer and hit.
void reward_enumeration(Problems& problems) {
    const GoldAnswerSet gold({"Canberra"});
    for (const bool valid : {true, false}) {
        for (const bool correct : {true, false}) {
            for (const bool with_hit : {true, false}) {
                const std::string answer = with_hit ? "Canberra" : "Sydney";
                Trajectory t;
                t.full_text = "<plan>p</plan>\n<search>\n<query>capital of australia</query>\n</search>"
                              "<information>\nDoc 1 (Title: \"Australia\") A federal state.\n</information>\n";
                if (valid) t.full_text += "<reflection>ok</reflection>\n";
                t.full_text += "<answer>" + answer + "</answer>";
                t.agent_answer = answer;
                t.termination = Termination::answered;
                const std::string generated = correct ? "It is Canberra" : "Melbourne";
                const auto r = score_trajectory(t, generated, gold);
                const std::string where = std::string(valid ? "valid" : "invalid") + "/" +
                                          (correct ? "correct" : "wrong") + "/" + (with_hit ? "hit" : "no-hit");
                const double want1 = valid && with_hit ? 1.0 : 0.0;
                const double want2 = (correct ? 1.0 : 0.0) + (with_hit ? 0.5 : 0.0);
                if (r.format_ok != valid) problems.add(where + ": format");
                if (r.stage1 != want1) problems.add(where + ": stage1 " + std::to_string(r.stage1));
                if (r.stage2 != want2) problems.add(where + ": stage2 " + std::to_string(r.stage2));
                if (r.stage1 != stage1_reward(t, gold) || r.stage2 != stage2_reward(t, generated, gold)) {
                    problems.add(where + ": breakdown disagrees with the reward functions");
                }
                if (!valid && with_hit && em_strict(*t.agent_answer, gold) == 1 && r.stage1 != 0.0) {
                    problems.add(where + ": format gate open");
                }
            }
        }
    }
}

// 5. GRPO arithmetic.
void grpo_math(Problems& problems) {
    using namespace qagent::grpo;
    const std::vector<double> rewards{1, 0, 0, 1, 0};
    const std::vector<double> want{1.2247, -0.8165, -0.8165, 1.2247, -0.8165};
    const auto adv = group_advantages(rewards);
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (std::abs(adv[i] - want[i]) > 1e-4) problems.add("advantage " + std::to_string(i));
    }

    qtest::props::Gen gen(99);
    GrpoParams no_kl;
    no_kl.beta = 0.0;
    for (int c = 0; c < 200; ++c) {
        auto group = qtest::props::random_group(gen);
        double num = 0.0, den = 0.0;
        const auto a = group_advantages(group.rewards);
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            group.rollouts[i].logp_new = group.rollouts[i].logp_old;
            num += a[i] * static_cast<double>(group.rollouts[i].unmasked());
            den += static_cast<double>(group.rollouts[i].unmasked());
        }
        if (std::abs(grpo_objective(group, a, no_kl).objective - num / den) > 1e-9) {
            problems.add("unit-ratio objective, case " + std::to_string(c));
        }
    }

    auto single = [&](double ratio, double advantage) {
        GroupTrace g;
        TokenTrace t;
        t.tokens = {"x"};
        t.logp_old = {0.0};
        t.logp_new = {std::log(ratio)};
        t.mask = {true};
        g.rollouts = {t, t};
        g.rewards = {0.0, 0.0};
        const std::vector<double> a{advantage, advantage};
        return grpo_objective(g, a, no_kl).objective;
    };
    if (const double v = single(1.5, 1.0); v != 1.2) problems.add("clip (1.5, +1) gave " + std::to_string(v));
    if (const double v = single(0.5, -1.0); v != -0.8) problems.add("clip (0.5, -1) gave " + std::to_string(v));

    for (int c = 0; c < 1000; ++c) {
        TokenTrace t;
        const std::size_t n = 1 + gen.below(20);
        std::vector<double> ref;
        for (std::size_t k = 0; k < n; ++k) {
            t.tokens.push_back("t");
            t.logp_new.push_back(gen.uniform(-8, 0));
            t.logp_old.push_back(t.logp_new.back());
            ref.push_back(gen.uniform(-8, 0));
            t.mask.push_back(gen.below(3) != 0);
        }
        t.mask[0] = true;
        t.logp_ref = ref;
        if (kl_estimate(t).value < 0.0) problems.add("negative KL, case " + std::to_string(c));
        t.logp_ref = t.logp_new;
        if (kl_estimate(t).value != 0.0) problems.add("KL of identical streams, case " + std::to_string(c));
    }

    // Information tokens: build a mask from the text and perturb what it hides.
    const std::string text = "<plan>p</plan>\n<search>\n<query>q</query>\n</search>"
                             "<information>\nDoc 1 (Title: \"T\") retrieved words here\n</information>\n"
                             "<reflection>r</reflection>\n<answer>a</answer>";
    std::vector<std::pair<std::size_t, std::size_t>> offsets;
    for (std::size_t pos = 0; pos < text.size();) {
        const std::size_t len = std::min<std::size_t>(1 + gen.below(4), text.size() - pos);
        offsets.emplace_back(pos, pos + len);
        pos += len;
    }
    const auto mask = information_mask(text, offsets);
    const auto begin = text.find("<information>"), end = text.find("</information>") + 14;
    std::size_t hidden = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const bool inside = offsets[i].first >= begin && offsets[i].second <= end;
        const bool outside = offsets[i].second <= begin || offsets[i].first >= end;
        if ((inside && mask[i]) || (outside && !mask[i])) problems.add("mask wrong at token " + std::to_string(i));
        hidden += mask[i] ? 0 : 1;
    }
    if (hidden == 0) problems.add("mask hides nothing");
    GroupTrace group;
    for (int r = 0; r < 3; ++r) {
        TokenTrace t;
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            t.tokens.push_back(text.substr(offsets[i].first, offsets[i].second - offsets[i].first));
            t.logp_old.push_back(gen.uniform(-3, -0.1));
            t.logp_new.push_back(t.logp_old.back() + gen.uniform(-0.4, 0.4));
        }
        t.logp_ref = t.logp_new;
        t.mask = mask;
        group.rollouts.push_back(t);
        group.rewards.push_back(r == 0 ? 1.0 : 0.0);
    }
    const auto a = group_advantages(group.rewards);
    const GrpoParams params;
    const double before = grpo_objective(group, a, params).objective;
    for (int trial = 0; trial < 100; ++trial) {
        auto changed = group;
        for (auto& t : changed.rollouts) {
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (mask[i]) continue;
                t.logp_new[i] = gen.uniform(-20, 0);
                t.logp_old[i] = gen.uniform(-20, 0);
                (*t.logp_ref)[i] = gen.uniform(-20, 0);
            }
        }
        if (std::abs(grpo_objective(changed, a, params).objective - before) > 1e-12) {
            problems.add("masked tokens moved the objective");
            break;
        }
    }
}

// 6. Randomized invariants.
void property_suites(Problems& problems) {
    constexpr std::size_t kCases = 2000;
    problems.add_all(qtest::props::metric_invariants(1, kCases));
    problems.add_all(qtest::props::metric_reference_agreement(2, kCases));
    problems.add_all(qtest::props::advantage_invariants(3, kCases));
    problems.add_all(qtest::props::objective_invariants(4, kCases));
    problems.add_all(qtest::props::protocol_invariants(5, kCases));
}

// 7. End-to-end evaluation through the command line.
void end_to_end(Problems& problems) {
    qtest::TempDir dir;
    const auto index = (dir / "qa.idx").string();
    if (cli({"index", "--corpus", data_path("qa_corpus.jsonl").string(), "--index", index}).code != 0) {
        problems.add("index command failed");
        return;
    }
    struct Expectation {
        const char* dataset;
        double em, f1;
    };
    for (const Expectation& e : {Expectation{"perfect", 100.0, 100.0}, Expectation{"toyqa", 80.0, 86.67}}) {
        for (const char* mode : {"end_to_end", "submodule"}) {
            const auto r = cli({"eval", "--corpus", data_path("qa_corpus.jsonl").string(), "--index", index,
                                "--policy-script", data_path("qa_policy.json").string(), "--generator-script",
                                data_path("qa_generator.json").string(), "-d",
                                data_path(std::string(e.dataset) + ".jsonl").string(), "--mode", mode, "--format",
                                "structured"});
            const std::string where = std::string(e.dataset) + " " + mode;
            if (r.code != 0) {
                problems.add(where + ": exit " + std::to_string(r.code) + " " + r.err);
                continue;
            }
            const auto report = parse_structured_report(r.out);
            const auto& m = report.per_dataset.at(e.dataset);
            if (std::abs(m.em - e.em) > 0.01 || std::abs(m.f1 - e.f1) > 0.01) {
                problems.add(where + ": EM " + std::to_string(m.em) + " F1 " + std::to_string(m.f1));
            }
        }
    }
}

// 8. A full run against an OpenAI-compatible server.
void served_episode(Problems& problems) {
    qtest::TempDir dir;
    const auto index = (dir / "toy.idx").string();
    if (cli({"index", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index}).code != 0) {
        problems.add("index command failed");
        return;
    }
    // Each output runs past its closing tag; the server must cut it there.
    qtest::CompletionStub stub(std::vector<std::string>{
        "<plan>Look it up.</plan>\n<search>\n<query>apple</query>\n</search>\n<information>\ninvented\n</information>",
        "\n<reflection>Apples are fruit.</reflection>\n<answer>fruit</answer>\nextra"});
    const auto trace = (dir / "trace.jsonl").string();
    const auto r = cli({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index,
                        "--policy-endpoint", stub.base_url(), "--policy-model", "stub", "-q",
                        "What kind of thing is an apple?", "--gold", "fruit", "--trace", trace});
    if (r.code != 0) {
        problems.add("run exited " + std::to_string(r.code) + ": " + r.err);
        return;
    }
    const auto record = nlohmann::json::parse(qtest::read_file(trace));
    const auto full = record["full_text"].get<std::string>();
    if (record["termination"] != "answered") problems.add("termination " + record["termination"].dump());
    if (full.find("invented") != std::string::npos || full.find("extra") != std::string::npos) {
        problems.add("text past the stop sequence leaked into the trajectory");
    }
    const auto& turns = record["turns"];
    if (turns.size() != 2 || !turns[0]["segment"].get<std::string>().ends_with("</search>") ||
        !turns[1]["segment"].get<std::string>().ends_with("</answer>")) {
        problems.add("segments do not end with their closing tags");
    }
    for (const auto& req : stub.requests()) {
        const auto stop = req.value("stop", std::vector<std::string>{});
        if (std::find(stop.begin(), stop.end(), "</search>") == stop.end() ||
            std::find(stop.begin(), stop.end(), "</answer>") == stop.end()) {
            problems.add("request without the closing-tag stop sequences");
        }
    }

    qtest::CompletionStub direct(std::vector<std::string>{"<plan>x</plan><search><query>q</query></search> more"});
    const CompletionClient client({direct.base_url(), "stub", "", {}});
    GenerationRequest req;
    req.prompt = "question";
    req.stop = {"</search>", "</answer>"};
    const auto chunk = client.complete(req);
    if (chunk.finish_reason != FinishReason::stop) problems.add("finish_reason " + std::string(to_string(chunk.finish_reason)));
    if (!chunk.text.ends_with("</search>")) problems.add("stop sequence not restored: " + chunk.text);
}

// Optional: the same episode against a real server named by the environment.
std::optional<std::string> live_episode(Problems& problems) {
    const char* endpoint = std::getenv("QAGENT_LIVE_ENDPOINT");
    if (endpoint == nullptr || *endpoint == '\0') return std::string("QAGENT_LIVE_ENDPOINT not set");
    const char* model = std::getenv("QAGENT_LIVE_MODEL");
    qtest::TempDir dir;
    const auto index = (dir / "toy.idx").string();
    cli({"index", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index});
    const auto trace = (dir / "trace.jsonl").string();
    std::ostringstream out, err;
    const int code = cli::run_cli({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index,
                                   "--policy-endpoint", endpoint, "--policy-model", model ? model : "", "-q",
                                   "What kind of thing is an apple?", "--trace", trace},
                                  out, err);
    if (code != 0) {
        problems.add("live run exited " + std::to_string(code) + ": " + err.str());
        return std::nullopt;
    }
    const auto record = nlohmann::json::parse(qtest::read_file(trace));
    for (const auto& turn : record["turns"]) {
        if (turn["search"].is_null()) continue;
        if (!turn["segment"].get<std::string>().ends_with("</search>")) problems.add("live search segment not cut at </search>");
    }
    return std::nullopt;
}

struct Criterion {
    int number;
    const char* name;
    double limit_seconds;
    std::function<void(Problems&)> check;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "BM25 matches exhaustive scoring on 20 random corpora", 10.0, bm25_oracle},
        {2, "answer metrics match the reference on 50 hand cases", 1.0, metric_oracle},
        {3, "five golden rollouts reproduce text and passage set", 1.0, golden_rollouts},
        {4, "reward values over format x answer x hit", 1.0, reward_enumeration},
        {5, "GRPO advantages, clipping, KL and masking", 5.0, grpo_math},
        {6, "randomized invariant suites", 30.0, property_suites},
        {7, "end-to-end eval on toy datasets in both modes", 5.0, end_to_end},
        {8, "episode against an OpenAI-compatible server", 10.0, served_episode},
    };
    log::set_warning_sink([](const std::string&) {});

    bool all = true;
    for (const auto& c : criteria) {
        Problems problems;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.check(problems);
        } catch (const std::exception& e) {
            problems.add(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.limit_seconds) {
            problems.add("took " + std::to_string(secs) + " s, limit " + std::to_string(c.limit_seconds) + " s");
        }
        const bool ok = problems.empty();
        all = all && ok;
        std::printf("criterion %d: %s  %s (%.3f s)%s%s\n", c.number, ok ? "PASS" : "FAIL", c.name, secs,
                    ok ? "" : "  ", ok ? "" : problems.summary().c_str());
    }

    Problems live;
    const auto start = std::chrono::steady_clock::now();
    std::optional<std::string> skipped;
    try {
        skipped = live_episode(live);
    } catch (const std::exception& e) {
        live.add(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (skipped) {
        std::printf("criterion 8 (live): SKIP  %s\n", skipped->c_str());
    } else {
        if (secs > 10.0) live.add("took " + std::to_string(secs) + " s");
        std::printf("criterion 8 (live): %s  (%.3f s)%s%s\n", live.empty() ? "PASS" : "FAIL", secs,
                    live.empty() ? "" : "  ", live.empty() ? "" : live.summary().c_str());
        all = all && live.empty();
    }
    std::fflush(stdout);
    return all ? 0 : 1;
}
