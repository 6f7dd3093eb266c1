#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "app_config.hpp"
#include "cli.hpp"
#include "paths.hpp"
#include "qagent/evalharness.hpp"
#include "stub_server.hpp"

using namespace qagent;
using qtest::data_path;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args, const cli::EnvLookup& env = [](const char*) { return std::optional<std::string>(); }) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err, env);
    return {code, out.str(), err.str()};
}

std::string toy_index(const qtest::TempDir& dir) {
    const auto path = (dir / "toy.idx").string();
    REQUIRE(invoke({"index", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", path}).code == 0);
    return path;
}

std::string qa_index(const qtest::TempDir& dir) {
    const auto path = (dir / "qa.idx").string();
    REQUIRE(invoke({"index", "--corpus", data_path("qa_corpus.jsonl").string(), "--index", path}).code == 0);
    return path;
}

}  // namespace

TEST_CASE("index") {
    qtest::TempDir dir;
    const auto r = invoke({"index", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", (dir / "i").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("indexed 3 documents") != std::string::npos);
    CHECK(r.out.find("avg length 2.67") != std::string::npos);

    CHECK(invoke({"index", "--corpus", (dir / "nope.jsonl").string(), "--index", (dir / "i").string()}).code == 2);
    CHECK(invoke({"index", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", "/nonexistent/dir/i"}).code == 2);
}

TEST_CASE("run reproduces the golden trace") {
    qtest::TempDir dir;
    const auto index = toy_index(dir);
    const auto trace = (dir / "trace.jsonl").string();
    const auto r = invoke({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index, "--policy-script",
                        data_path("toy_policy.json").string(), "-q", "What kind of thing is an apple?", "--gold", "fruit",
                        "--trace", trace});
    CHECK(r.code == 0);
    CHECK(qtest::read_file(trace) == qtest::read_file(data_path("golden/run_toy.jsonl")));
    CHECK(r.out.find("stage1=1 ") != std::string::npos);
    CHECK(r.out.find("agent answer: fruit") != std::string::npos);
    CHECK(r.out.find("termination: answered") != std::string::npos);
}

TEST_CASE("run with generator prints its answer") {
    qtest::TempDir dir;
    const auto index = qa_index(dir);
    const auto r = invoke({"run", "--corpus", data_path("qa_corpus.jsonl").string(), "--index", index, "--policy-script",
                        data_path("qa_policy.json").string(), "--generator-script", data_path("qa_generator.json").string(),
                        "-q", "Who wrote Hamlet?", "--gold", "Shakespeare"});
    CHECK(r.code == 0);
    CHECK(r.out.find("generator answer: William Shakespeare") != std::string::npos);
    CHECK(r.out.find("stage2=1.5") != std::string::npos);
}

TEST_CASE("run resource errors") {
    qtest::TempDir dir;
    CHECK(invoke({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", (dir / "missing.idx").string(),
               "--policy-script", data_path("toy_policy.json").string(), "-q", "x"})
              .code == 2);
    const auto index = toy_index(dir);
    CHECK(invoke({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index, "-q", "x"}).code == 64);
    CHECK(invoke({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index, "--policy-script",
               data_path("toy_policy.json").string()})
              .code == 64);
}

TEST_CASE("run failure still writes the partial trace") {
    qtest::TempDir dir;
    qtest::CompletionStub llm(std::vector<std::string>{"<plan>p</plan><search><query>apple</query></search>"});
    const auto trace = (dir / "t.jsonl").string();
    // Port 1 refuses connections, so the first search fails.
    const auto r = invoke({"run", "--retriever-url", "http://127.0.0.1:1/retrieve", "--policy-endpoint", llm.base_url(),
                        "--policy-model", "m", "-q", "What is an apple?", "--trace", trace});
    CHECK(r.code == 1);
    const auto record = nlohmann::json::parse(qtest::read_file(trace));
    CHECK(record["termination"] == "error");
    CHECK(record["turns"].size() == 1);
}

TEST_CASE("eval") {
    qtest::TempDir dir;
    const auto index = qa_index(dir);
    const std::vector<std::string> base{"eval", "--corpus", data_path("qa_corpus.jsonl").string(), "--index", index,
                                        "--policy-script", data_path("qa_policy.json").string(), "--generator-script",
                                        data_path("qa_generator.json").string()};
    SUBCASE("toyqa submodule") {
        auto args = base;
        for (const char* a : {"-d", "", "--mode", "submodule", "--format", "structured"}) args.emplace_back(a);
        args[args.size() - 5] = data_path("toyqa.jsonl").string();
        const auto r = invoke(args);
        CHECK(r.code == 0);
        const auto report = parse_structured_report(r.out);
        CHECK(report.mode == EvalMode::submodule);
        CHECK(std::abs(report.per_dataset.at("toyqa").em - 80.0) < 0.01);
        CHECK(std::abs(report.per_dataset.at("toyqa").f1 - 86.67) < 0.01);
    }
    SUBCASE("invalid mode") {
        auto args = base;
        for (const char* a : {"-d", "", "--mode", "both"}) args.emplace_back(a);
        args[args.size() - 3] = data_path("toyqa.jsonl").string();
        CHECK(invoke(args).code == 64);
    }
    SUBCASE("empty dataset") {
        auto args = base;
        args.emplace_back("-d");
        args.push_back(data_path("empty.jsonl").string());
        args.emplace_back("--format");
        args.emplace_back("delimited");
        const auto r = invoke(args);
        CHECK(r.code == 0);
        CHECK(r.err.find("warning") != std::string::npos);
        CHECK(r.out == "mode,dataset,em,f1,n\nend_to_end,empty,0.00,0.00,0\nend_to_end,Average,0.00,0.00,0\n");
    }
    SUBCASE("report files and traces") {
        auto args = base;
        for (const std::string& a : std::vector<std::string>{"-d", data_path("perfect.jsonl").string(), "--format", "table", "--format",
                                    "delimited", "--format", "structured", "--out-dir", dir.path().string(), "--traces",
                                    (dir / "traces.jsonl").string()}) {
            args.push_back(a);
        }
        const auto r = invoke(args);
        CHECK(r.code == 0);
        CHECK(std::filesystem::exists(dir / "report.txt"));
        CHECK(std::filesystem::exists(dir / "report.csv"));
        const auto report = parse_structured_report(qtest::read_file(dir / "report.json"));
        CHECK(report.per_dataset.at("perfect").em == 100.0);
        const auto v = invoke({"trace-validate", "--traces", (dir / "traces.jsonl").string(), "--strict-format"});
        CHECK(v.code == 0);
        CHECK(v.out.find("4 record(s), 0 failed") != std::string::npos);
    }
    SUBCASE("submodule without generator") {
        const auto r = invoke({"eval", "--corpus", data_path("qa_corpus.jsonl").string(), "--index", index,
                            "--policy-script", data_path("qa_policy.json").string(), "-d",
                            data_path("toyqa.jsonl").string(), "--mode", "submodule"});
        CHECK(r.code == 64);
    }
}

TEST_CASE("grpo-check") {
    const auto r = invoke({"grpo-check", "--traces", data_path("groups.jsonl").string(), "--beta", "0"});
    CHECK(r.code == 0);
    CHECK(r.out.find("advantages: 1.2247 -0.8165 -0.8165 1.2247 -0.8165") != std::string::npos);
    // Second group: unit ratios, lengths 2 and 3 after masking, advantages +1 and -1.
    CHECK(r.out.find("objective: -0.200000") != std::string::npos);

    const auto bad = invoke({"grpo-check", "--traces", data_path("groups_bad_lengths.jsonl").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("record 1") != std::string::npos);
    CHECK(bad.err.find("rollout 1") != std::string::npos);

    CHECK(invoke({"grpo-check", "--traces", "/nonexistent.jsonl"}).code == 2);
    CHECK(invoke({"grpo-check", "--traces", data_path("groups.jsonl").string(), "--epsilon", "2"}).code == 64);
}

TEST_CASE("trace-validate") {
    const auto ok = invoke({"trace-validate", "--traces", data_path("golden/run_toy.jsonl").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("record 0: ok (format valid)") != std::string::npos);
    CHECK(invoke({"trace-validate", "--traces", data_path("golden/run_toy.jsonl").string(), "--max-turns", "1"}).code == 1);
    CHECK(invoke({"trace-validate", "--traces", data_path("toyqa.jsonl").string()}).code == 1);
}

TEST_CASE("config file, flag overrides and environment") {
    qtest::TempDir dir;
    const auto index = toy_index(dir);
    std::ofstream(dir / "config.json") << nlohmann::json{
        {"corpus", data_path("toy_corpus.jsonl").string()},
        {"index", index},
        {"policy", {{"type", "scripted"}, {"script", data_path("toy_policy.json").string()}}},
        {"rollout", {{"max_turns", 1}}}}.dump();
    const auto cfg = (dir / "config.json").string();

    const auto one_turn = invoke({"run", "--config", cfg, "-q", "What kind of thing is an apple?"});
    CHECK(one_turn.code == 0);
    CHECK(one_turn.out.find("termination: budget_exhausted") != std::string::npos);

    const auto overridden = invoke({"run", "--config", cfg, "--max-turns", "4", "-q", "What kind of thing is an apple?"});
    CHECK(overridden.out.find("termination: answered") != std::string::npos);

    CHECK(invoke({"run", "--config", (dir / "none.json").string(), "-q", "x"}).code == 2);

    auto config = cli::load_app_config(cfg);
    CHECK(config.rollout.max_turns == 1);
    CHECK(config.policy.kind == cli::ModelSpec::Kind::scripted);
    cli::apply_environment(config, [](const char* name) -> std::optional<std::string> {
        return std::string(name) == cli::kApiKeyVariable ? std::optional<std::string>("tok") : std::nullopt;
    });
    CHECK(config.policy.api_key == "tok");
    CHECK(config.generator.api_key == "tok");
}

TEST_CASE("relative config paths resolve against the config file") {
    qtest::TempDir dir;
    std::filesystem::copy_file(data_path("toy_corpus.jsonl"), dir / "corpus.jsonl");
    std::ofstream(dir / "c.json") << R"({"corpus": "corpus.jsonl", "index": "out.idx"})";
    CHECK(invoke({"index", "--config", (dir / "c.json").string()}).code == 0);
    CHECK(std::filesystem::exists(dir / "out.idx"));
}

TEST_CASE("remote policy receives the api key from the environment") {
    qtest::TempDir dir;
    const auto index = toy_index(dir);
    qtest::CompletionStub llm(std::vector<std::string>{"<plan>p</plan><answer>fruit</answer>"});
    const auto r = invoke({"run", "--corpus", data_path("toy_corpus.jsonl").string(), "--index", index,
                        "--policy-endpoint", llm.base_url(), "--policy-model", "m", "-q", "q"},
                       [](const char*) { return std::optional<std::string>("sekret"); });
    CHECK(r.code == 0);
    CHECK(r.out.find("agent answer: fruit") != std::string::npos);
}

TEST_CASE("usage") {
    CHECK(invoke({}).code == 64);
    CHECK(invoke({"frobnicate"}).code == 64);
    CHECK(invoke({"--help"}).code == 0);
    CHECK(invoke({"index", "--no-such-flag"}).code == 64);
}
