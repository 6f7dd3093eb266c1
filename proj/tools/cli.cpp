#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

#include <CLI11.hpp>

#include "qagent/completion_client.hpp"
#include "qagent/corpus.hpp"
#include "qagent/evalharness.hpp"
#include "qagent/log.hpp"
#include "qagent/rewards.hpp"
#include "qagent/trace.hpp"

namespace qagent::cli {

namespace {

/// A file or directory the command needs does not exist.
class MissingResource : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

std::string num(double v, const char* format = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string short_num(double v) { return num(v, "%g"); }

void require_file(const std::filesystem::path& path, const char* what) {
    if (path.empty()) throw UsageError(std::string("no ") + what + " configured");
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw MissingResource(std::string(what) + " not found: " + path.string());
    }
}

/// Flags shared by every subcommand; each one overrides the matching
/// config-file field when given.
struct CommonFlags {
    std::string config;
    std::string corpus, index, retriever_url;
    std::string policy_script, policy_endpoint, policy_model;
    std::string generator_script, generator_endpoint, generator_model;
    std::size_t max_turns = 0, passages_per_query = 0, max_total_tokens = 0, max_response_tokens = 0;
    double temperature = 0, top_p = 0, k1 = 0, b = 0;
    std::size_t concurrency = 0;
    bool fail_closed = false;
    std::map<std::string, CLI::Option*> given;

    void attach(CLI::App* app) {
        const auto add = [&](const char* name, auto& target, const char* help) {
            given[name] = app->add_option(std::string("--") + name, target, help);
        };
        add("config", config, "JSON config file");
        add("corpus", corpus, "corpus JSONL file");
        add("index", index, "BM25 index file");
        add("retriever-url", retriever_url, "use a remote retriever at this URL");
        add("policy-script", policy_script, "scripted policy JSON");
        add("policy-endpoint", policy_endpoint, "OpenAI-compatible base URL for the policy");
        add("policy-model", policy_model, "model name sent to the policy endpoint");
        add("generator-script", generator_script, "scripted generator JSON");
        add("generator-endpoint", generator_endpoint, "OpenAI-compatible base URL for the generator");
        add("generator-model", generator_model, "model name sent to the generator endpoint");
        add("max-turns", max_turns, "action rounds per episode");
        add("passages-per-query", passages_per_query, "passages retrieved per query");
        add("max-total-tokens", max_total_tokens, "token budget per episode");
        add("max-response-tokens", max_response_tokens, "token cap per generation call");
        add("temperature", temperature, "policy sampling temperature");
        add("top-p", top_p, "policy nucleus sampling mass");
        add("k1", k1, "BM25 term-frequency saturation");
        add("b", b, "BM25 length normalization");
        add("concurrency", concurrency, "episodes run at once during eval");
        given["fail-closed"] = app->add_flag("--fail-closed", fail_closed,
                                             "leave failed episodes out of the means instead of scoring 0");
    }

    bool has(const char* name) const { return given.at(name)->count() > 0; }

    AppConfig resolve(const EnvLookup& env) const {
        AppConfig c;
        if (has("config")) {
            require_file(config, "config file");
            c = load_app_config(config);
        }
        if (has("corpus")) c.corpus_path = corpus;
        if (has("index")) c.index_path = index;
        if (has("retriever-url")) c.retriever = {true, retriever_url};
        if (has("policy-script")) c.policy = {ModelSpec::Kind::scripted, policy_script, {}, {}, {}};
        if (has("policy-endpoint")) c.policy = {ModelSpec::Kind::remote, {}, policy_endpoint, c.policy.model, {}};
        if (has("policy-model")) c.policy.model = policy_model;
        if (has("generator-script")) c.generator = {ModelSpec::Kind::scripted, generator_script, {}, {}, {}};
        if (has("generator-endpoint")) {
            c.generator = {ModelSpec::Kind::remote, {}, generator_endpoint, c.generator.model, {}};
        }
        if (has("generator-model")) c.generator.model = generator_model;
        if (has("max-turns")) c.rollout.max_turns = max_turns;
        if (has("passages-per-query")) c.rollout.passages_per_query = passages_per_query;
        if (has("max-total-tokens")) c.rollout.max_total_tokens = max_total_tokens;
        if (has("max-response-tokens")) c.rollout.max_response_tokens = max_response_tokens;
        if (has("temperature")) c.rollout.temperature = temperature;
        if (has("top-p")) c.rollout.top_p = top_p;
        if (has("k1")) c.bm25.k1 = k1;
        if (has("b")) c.bm25.b = b;
        if (has("concurrency")) c.concurrency = concurrency;
        if (fail_closed) c.fail_open = false;
        apply_environment(c, env);
        try {
            c.rollout.validate();
            c.bm25.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

CompletionConfig completion_config(const ModelSpec& spec) {
    CompletionConfig cc;
    cc.endpoint = spec.endpoint;
    cc.model = spec.model;
    cc.api_key = spec.api_key;
    return cc;
}

std::unique_ptr<Retriever> make_retriever(const AppConfig& c) {
    if (c.retriever.remote) return std::make_unique<RemoteRetriever>(c.retriever.url);
    require_file(c.corpus_path, "corpus");
    require_file(c.index_path, "index");
    auto corpus = std::make_shared<const Corpus>(load_corpus(c.corpus_path));
    auto index = std::make_shared<const Bm25Index>(load_index(c.index_path));
    return std::make_unique<Bm25Retriever>(std::move(corpus), std::move(index));
}

std::unique_ptr<Policy> make_policy(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelSpec::Kind::scripted:
            require_file(spec.script_path, "policy script");
            return std::make_unique<ScriptedPolicy>(ScriptedPolicy::from_file(spec.script_path));
        case ModelSpec::Kind::remote:
            return std::make_unique<RemotePolicy>(completion_config(spec));
        case ModelSpec::Kind::none:
            break;
    }
    throw UsageError("no policy configured (use --policy-script or --policy-endpoint)");
}

std::unique_ptr<Generator> make_generator(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelSpec::Kind::scripted:
            require_file(spec.script_path, "generator script");
            return std::make_unique<ScriptedGenerator>(ScriptedGenerator::from_file(spec.script_path));
        case ModelSpec::Kind::remote:
            return std::make_unique<RemoteGenerator>(completion_config(spec));
        case ModelSpec::Kind::none:
            break;
    }
    return nullptr;
}

std::string rewards_line(const RewardBreakdown& r) {
    return "format_ok=" + std::to_string(r.format_ok ? 1 : 0) + " em_strict=" + std::to_string(r.em_strict) +
           " em_contains=" + std::to_string(r.em_contains) + " f1=" + num(r.f1) + " hit=" + std::to_string(r.hit) +
           " stage1=" + short_num(r.stage1) + " stage2=" + short_num(r.stage2);
}

void write_trace_file(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write trace file " + path.string());
    for (const auto& r : records) write_trace(r, out);
}

std::ifstream open_input(const std::string& path, const char* what) {
    require_file(path, what);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot open ") + what + " " + path);
    return in;
}

// ---- index ----------------------------------------------------------------

int cmd_index(const AppConfig& c, std::ostream& out) {
    require_file(c.corpus_path, "corpus");
    if (c.index_path.empty()) throw UsageError("no index path configured");
    const Corpus corpus = load_corpus(c.corpus_path);
    const Bm25Index index = build_index(corpus, c.bm25);
    save_index(index, c.index_path);
    out << "indexed " << index.doc_count() << " documents, avg length " << num(index.avg_doc_length(), "%.2f")
        << ", " << index.term_count() << " terms -> " << c.index_path.string() << "\n";
    return kExitOk;
}

// ---- run ------------------------------------------------------------------

struct RunFlags {
    std::string question;
    std::vector<std::string> gold;
    std::string trace;
};

int cmd_run(const AppConfig& c, const RunFlags& f, std::ostream& out, std::ostream& err) {
    auto retriever = make_retriever(c);
    auto policy = make_policy(c.policy);
    auto generator = make_generator(c.generator);
    std::optional<GoldAnswerSet> gold;
    if (!f.gold.empty()) {
        try {
            gold.emplace(f.gold);
        } catch (const InvalidArgument& e) {
            throw UsageError(std::string("--gold: ") + e.what());
        }
    }

    TraceRecord record;
    std::optional<std::string> failure;
    try {
        record.trajectory = run_episode(f.question, *policy, *retriever, c.rollout);
        if (generator) record.generator_answer = finalize_with_generator(record.trajectory, f.question, *generator);
    } catch (const EpisodeError& e) {
        record.trajectory = e.partial();
        failure = e.what();
    }
    if (gold) {
        record.gold = gold->answers();
        record.rewards = score_trajectory(record.trajectory, record.generator_answer, *gold);
    }
    if (!f.trace.empty()) write_trace_file(f.trace, {record});

    const Trajectory& t = record.trajectory;
    out << t.full_text;
    if (!t.full_text.empty() && t.full_text.back() != '\n') out << "\n";
    out << "---\n";
    out << "termination: " << to_string(t.termination) << "\n";
    out << "turns: " << t.turns.size() << "\n";
    out << "agent answer: " << (t.agent_answer ? *t.agent_answer : "(none)") << "\n";
    if (generator) out << "generator answer: " << record.generator_answer.value_or("(none)") << "\n";
    out << "passages: " << t.info_set.size() << "\n";
    if (record.rewards) out << "rewards: " << rewards_line(*record.rewards) << "\n";

    if (failure) {
        err << "error: " << *failure << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalFlags {
    std::vector<std::string> datasets;
    std::string mode = "end_to_end";
    std::vector<std::string> formats;
    std::string out_dir;
    std::string traces;
};

int cmd_eval(const AppConfig& c, const EvalFlags& f, std::ostream& out, std::ostream& err) {
    const EvalMode mode = eval_mode_from_string(f.mode);
    std::vector<ReportFormat> formats;
    for (const auto& name : f.formats) formats.push_back(report_format_from_string(name));
    if (formats.empty()) formats.push_back(ReportFormat::table);

    std::vector<Dataset> datasets;
    std::size_t total = 0;
    for (const auto& path : f.datasets) {
        require_file(path, "dataset");
        Dataset ds;
        ds.name = std::filesystem::path(path).stem().string();
        for (const auto& other : datasets) {
            if (other.name == ds.name) ds.name += "_" + std::to_string(datasets.size());
        }
        ds.examples = load_dataset(path);
        total += ds.examples.size();
        datasets.push_back(std::move(ds));
    }

    EvalRun run;
    if (total == 0) {
        run.report.mode = mode;
        for (const auto& ds : datasets) run.report.per_dataset.try_emplace(ds.name);
    } else {
        auto retriever = make_retriever(c);
        auto policy = make_policy(c.policy);
        std::unique_ptr<Generator> generator;
        if (mode == EvalMode::submodule) {
            generator = make_generator(c.generator);
            if (!generator) throw UsageError("submodule mode needs a generator (--generator-script or --generator-endpoint)");
        }
        EvalOptions options;
        options.rollout = c.rollout;
        options.mode = mode;
        options.concurrency = c.concurrency;
        options.fail_open = c.fail_open;
        run = evaluate(datasets, *policy, *retriever, generator.get(), options);
    }

    if (!f.traces.empty()) {
        std::vector<TraceRecord> records;
        for (const auto& o : run.outcomes) records.push_back(o.trace);
        write_trace_file(f.traces, records);
    }

    for (const ReportFormat format : formats) {
        if (f.out_dir.empty()) {
            out << render_report(run.report, format);
            continue;
        }
        const char* ext = format == ReportFormat::table ? "txt" : format == ReportFormat::delimited ? "csv" : "json";
        const auto path = std::filesystem::path(f.out_dir) / (std::string("report.") + ext);
        emit_report(run.report, format, path);
        out << "wrote " << path.string() << "\n";
    }

    if (run.any_failed()) {
        err << "error: " << run.failed << " episode(s) failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

// ---- grpo-check -----------------------------------------------------------

struct GrpoFlags {
    std::string traces;
    double epsilon = 0, beta = 0, sigma_floor = 0;
    CLI::Option* epsilon_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
    CLI::Option* sigma_opt = nullptr;
};

int cmd_grpo_check(const AppConfig& c, const GrpoFlags& f, std::ostream& out) {
    grpo::GrpoParams params = c.grpo;
    if (f.epsilon_opt->count()) params.epsilon = f.epsilon;
    if (f.beta_opt->count()) params.beta = f.beta;
    if (f.sigma_opt->count()) params.sigma_floor = f.sigma_floor;
    try {
        params.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    auto in = open_input(f.traces, "trace file");
    const auto groups = grpo::read_group_traces(in);
    const auto reports = grpo::evaluate_groups(groups, params);
    for (std::size_t g = 0; g < reports.size(); ++g) {
        const auto& r = reports[g];
        out << "group " << g;
        if (!r.question_id.empty()) out << " (" << r.question_id << ")";
        out << "\n  advantages:";
        for (double a : r.advantages) out << " " << num(a);
        out << "\n  objective: " << num(r.result.objective, "%.6f") << "\n  surrogate: "
            << num(r.result.surrogate, "%.6f") << "\n  kl: " << num(r.result.kl, "%.6f")
            << "\n  clip_fraction: " << num(r.result.clip_fraction) << "\n  mean_ratio: "
            << num(r.result.mean_ratio) << "\n  tokens: " << r.result.unmasked_tokens << "\n";
        for (const auto& note : r.result.notes) out << "  note: " << note << "\n";
    }
    return kExitOk;
}

// ---- trace-validate -------------------------------------------------------

struct ValidateFlags {
    std::string traces;
    std::size_t max_turns = 0;
    CLI::Option* max_turns_opt = nullptr;
    bool strict_format = false;
};

int cmd_trace_validate(const ValidateFlags& f, std::ostream& out) {
    auto in = open_input(f.traces, "trace file");
    const auto records = read_traces(in);
    std::optional<std::size_t> max_turns;
    if (f.max_turns_opt->count()) max_turns = f.max_turns;

    std::size_t bad = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const TraceCheck check = validate_trace(records[i], max_turns);
        const bool format_bad = f.strict_format && !check.format.valid();
        out << "record " << i << ": " << (check.consistent() && !format_bad ? "ok" : "FAILED");
        out << " (format " << (check.format.valid() ? "valid" : "invalid");
        for (std::size_t v = 0; v < check.format.violations.size(); ++v) {
            out << (v == 0 ? ": " : ", ") << check.format.violations[v].rule;
        }
        out << ")\n";
        for (const auto& p : check.problems) out << "  " << p << "\n";
        if (!check.consistent() || format_bad) ++bad;
    }
    out << records.size() << " record(s), " << bad << " failed\n";
    return bad == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"Agentic retrieval: index a corpus, run and evaluate search agents, check GRPO traces",
                 "qagent"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    CommonFlags common[4];

    auto* index_cmd = app.add_subcommand("index", "build and save a BM25 index over a corpus");
    common[0].attach(index_cmd);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "run one episode and print its trajectory");
    common[1].attach(run_cmd);
    run_cmd->add_option("--question,-q", run_flags.question, "question to answer")->required();
    run_cmd->add_option("--gold", run_flags.gold, "gold answer (repeatable); enables reward output");
    run_cmd->add_option("--trace", run_flags.trace, "write the trace record here");

    EvalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate over one or more datasets");
    common[2].attach(eval_cmd);
    eval_cmd->add_option("--dataset,-d", eval_flags.datasets, "dataset JSONL (repeatable)")->required();
    eval_cmd->add_option("--mode", eval_flags.mode, "end_to_end or submodule")
        ->check(CLI::IsMember({"end_to_end", "submodule"}));
    eval_cmd->add_option("--format", eval_flags.formats, "table, delimited or structured (repeatable)")
        ->check(CLI::IsMember({"table", "delimited", "structured"}));
    eval_cmd->add_option("--out-dir", eval_flags.out_dir, "write report files here instead of stdout");
    eval_cmd->add_option("--traces", eval_flags.traces, "write one trace record per example here");

    GrpoFlags grpo_flags;
    auto* grpo_cmd = app.add_subcommand("grpo-check", "evaluate the GRPO objective on recorded group traces");
    common[3].attach(grpo_cmd);
    grpo_cmd->add_option("--traces", grpo_flags.traces, "group trace JSONL")->required();
    grpo_flags.epsilon_opt = grpo_cmd->add_option("--epsilon", grpo_flags.epsilon, "ratio clip range");
    grpo_flags.beta_opt = grpo_cmd->add_option("--beta", grpo_flags.beta, "KL coefficient");
    grpo_flags.sigma_opt = grpo_cmd->add_option("--sigma-floor", grpo_flags.sigma_floor, "advantage std floor");

    ValidateFlags validate_flags;
    auto* validate_cmd = app.add_subcommand("trace-validate", "check trajectory trace records");
    validate_cmd->add_option("--traces", validate_flags.traces, "trajectory trace JSONL")->required();
    validate_flags.max_turns_opt =
        validate_cmd->add_option("--max-turns", validate_flags.max_turns, "fail records with more turns");
    validate_cmd->add_flag("--strict-format", validate_flags.strict_format, "fail records whose text breaks the tag format");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto previous_sink = log::set_warning_sink([&err](const std::string& m) { err << "warning: " << m << "\n"; });
    struct Restore {
        log::Sink& sink;
        ~Restore() { log::set_warning_sink(std::move(sink)); }
    } restore{previous_sink};

    try {
        if (*index_cmd) return cmd_index(common[0].resolve(env), out);
        if (*run_cmd) return cmd_run(common[1].resolve(env), run_flags, out, err);
        if (*eval_cmd) return cmd_eval(common[2].resolve(env), eval_flags, out, err);
        if (*grpo_cmd) return cmd_grpo_check(common[3].resolve(env), grpo_flags, out);
        if (*validate_cmd) return cmd_trace_validate(validate_flags, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const MissingResource& e) {
        err << "error: " << e.what() << "\n";
        return kExitMissingResource;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitMissingResource;
    } catch (const InvalidArgument& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace qagent::cli
