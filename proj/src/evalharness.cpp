#include "qagent/evalharness.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "qagent/error.hpp"
#include "qagent/log.hpp"
#include "qagent/text.hpp"

namespace qagent {

std::vector<EvalExample> read_dataset(std::istream& in) {
    std::vector<EvalExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto fail = [line_no](const std::string& what) {
            return ParseError("line " + std::to_string(line_no) + ": " + what, line_no);
        };
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw fail(e.what());
        }
        if (!record.is_object()) throw fail("record is not an object");

        std::string id;
        const auto id_it = record.find("id");
        if (id_it == record.end()) throw fail("missing field \"id\"");
        if (id_it->is_string()) {
            id = id_it->get<std::string>();
        } else if (id_it->is_number_integer()) {
            id = std::to_string(id_it->get<std::int64_t>());
        } else {
            throw fail("\"id\" must be a string or integer");
        }

        const auto q_it = record.find("question");
        if (q_it == record.end() || !q_it->is_string()) throw fail("missing string field \"question\"");
        std::string question = q_it->get<std::string>();
        if (text::trim(question).empty()) throw fail("empty question");

        const auto g_it = record.find("golden_answers");
        if (g_it == record.end() || !g_it->is_array()) throw fail("missing list field \"golden_answers\"");
        std::vector<std::string> answers;
        for (const auto& a : *g_it) {
            if (!a.is_string()) throw fail("golden_answers must hold strings");
            answers.push_back(a.get<std::string>());
        }
        try {
            examples.push_back({std::move(id), std::move(question), GoldAnswerSet(std::move(answers))});
        } catch (const InvalidArgument& e) {
            throw fail(e.what());
        }
    }
    return examples;
}

std::vector<EvalExample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    auto examples = read_dataset(in);
    if (examples.empty()) log::warn("dataset " + path.string() + " has no examples");
    return examples;
}

std::string_view to_string(EvalMode mode) {
    return mode == EvalMode::end_to_end ? "end_to_end" : "submodule";
}

EvalMode eval_mode_from_string(std::string_view name) {
    if (name == "end_to_end") return EvalMode::end_to_end;
    if (name == "submodule") return EvalMode::submodule;
    throw InvalidArgument("unknown mode \"" + std::string(name) + "\" (expected end_to_end or submodule)");
}

namespace {

struct Job {
    std::size_t dataset;
    std::size_t example;
};

ExampleOutcome run_one(const Dataset& dataset, const EvalExample& ex, const Policy& policy,
                       const Retriever& retriever, const Generator* generator, const EvalOptions& options) {
    ExampleOutcome out;
    out.dataset = dataset.name;
    out.id = ex.id;
    out.trace.gold = ex.golden_answers.answers();
    out.trace.trajectory.question = ex.question;

    try {
        out.trace.trajectory = run_episode(ex.question, policy, retriever, options.rollout);
        if (options.mode == EvalMode::submodule) {
            out.trace.generator_answer = finalize_with_generator(out.trace.trajectory, ex.question, *generator);
        }
    } catch (const EpisodeError& e) {
        out.trace.trajectory = e.partial();
        out.error = e.what();
    } catch (const std::exception& e) {
        out.error = e.what();
    }

    out.trace.rewards = score_trajectory(out.trace.trajectory, out.trace.generator_answer, ex.golden_answers);
    if (out.error) return out;

    out.prediction = options.mode == EvalMode::end_to_end ? out.trace.trajectory.agent_answer
                                                          : out.trace.generator_answer;
    const std::string_view pred = out.prediction ? std::string_view(*out.prediction) : std::string_view();
    out.em = em_contains(pred, ex.golden_answers);
    out.f1 = token_f1(pred, ex.golden_answers);
    return out;
}

}  // namespace

EvalRun evaluate(std::span<const Dataset> datasets, const Policy& policy, const Retriever& retriever,
                 const Generator* generator, const EvalOptions& options) {
    options.rollout.validate();
    if (options.concurrency == 0) throw InvalidArgument("concurrency must be at least 1");
    if (options.mode == EvalMode::submodule && generator == nullptr) {
        throw InvalidArgument("submodule mode needs a generator");
    }

    std::vector<Job> jobs;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        for (std::size_t e = 0; e < datasets[d].examples.size(); ++e) jobs.push_back({d, e});
    }

    std::vector<ExampleOutcome> outcomes(jobs.size());
    const auto n = static_cast<std::int64_t>(jobs.size());
    const int threads = static_cast<int>(std::min<std::size_t>(options.concurrency, 1024));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) {
        const Job job = jobs[static_cast<std::size_t>(i)];
        const Dataset& ds = datasets[job.dataset];
        outcomes[static_cast<std::size_t>(i)] =
            run_one(ds, ds.examples[job.example], policy, retriever, generator, options);
    }

    std::stable_sort(outcomes.begin(), outcomes.end(), [](const ExampleOutcome& a, const ExampleOutcome& b) {
        return a.dataset != b.dataset ? a.dataset < b.dataset : a.id < b.id;
    });

    EvalRun run;
    run.report.mode = options.mode;
    for (const Dataset& ds : datasets) run.report.per_dataset.try_emplace(ds.name);

    std::map<std::string, std::array<double, 2>> sums;
    for (const ExampleOutcome& o : outcomes) {
        if (o.error) {
            ++run.failed;
            log::warn("example " + o.dataset + "/" + o.id + " failed: " + *o.error);
            if (!options.fail_open) continue;
        }
        auto& s = sums[o.dataset];
        s[0] += o.em;
        s[1] += o.f1;
        ++run.report.per_dataset[o.dataset].n;
    }

    std::size_t scored = 0;
    for (auto& [name, m] : run.report.per_dataset) {
        if (m.n == 0) continue;
        const auto& s = sums[name];
        m.em = 100.0 * s[0] / static_cast<double>(m.n);
        m.f1 = 100.0 * s[1] / static_cast<double>(m.n);
        run.report.average.em += m.em;
        run.report.average.f1 += m.f1;
        run.report.average.n += m.n;
        ++scored;
    }
    if (scored > 0) {
        run.report.average.em /= static_cast<double>(scored);
        run.report.average.f1 /= static_cast<double>(scored);
    }
    run.outcomes = std::move(outcomes);
    return run;
}

std::string_view to_string(ReportFormat format) {
    switch (format) {
        case ReportFormat::table: return "table";
        case ReportFormat::delimited: return "delimited";
        case ReportFormat::structured: return "structured";
    }
    return "table";
}

ReportFormat report_format_from_string(std::string_view name) {
    if (name == "table") return ReportFormat::table;
    if (name == "delimited" || name == "csv") return ReportFormat::delimited;
    if (name == "structured" || name == "json") return ReportFormat::structured;
    throw InvalidArgument("unknown report format \"" + std::string(name) +
                          "\" (expected table, delimited or structured)");
}

namespace {

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string render_table(const MetricsReport& report) {
    std::vector<std::pair<std::string, DatasetMetrics>> columns(report.per_dataset.begin(),
                                                                report.per_dataset.end());
    columns.emplace_back("Average", report.average);

    const std::string label(to_string(report.mode));
    const std::size_t label_width = std::max<std::size_t>(label.size(), 7) + 2;
    std::string names = pad("", label_width);
    std::string metrics = pad("Mode", label_width);
    std::string values = pad(label, label_width);
    for (const auto& [name, m] : columns) {
        const std::size_t width = std::max<std::size_t>(name.size() + 2, 16);
        names += pad(name, width);
        metrics += pad(pad("EM", 8) + "F1", width);
        values += pad(pad(fixed2(m.em), 8) + fixed2(m.f1), width);
    }
    const auto rstrip = [](std::string s) {
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s;
    };
    return rstrip(names) + "\n" + rstrip(metrics) + "\n" + rstrip(values) + "\n";
}

std::string render_delimited(const MetricsReport& report) {
    std::string out = "mode,dataset,em,f1,n\n";
    const std::string mode(to_string(report.mode));
    for (const auto& [name, m] : report.per_dataset) {
        out += mode + "," + csv_field(name) + "," + fixed2(m.em) + "," + fixed2(m.f1) + "," +
               std::to_string(m.n) + "\n";
    }
    out += mode + ",Average," + fixed2(report.average.em) + "," + fixed2(report.average.f1) + "," +
           std::to_string(report.average.n) + "\n";
    return out;
}

std::string render_structured(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["mode"] = std::string(to_string(report.mode));
    j["datasets"] = nlohmann::ordered_json::object();
    for (const auto& [name, m] : report.per_dataset) {
        j["datasets"][name] = {{"em", m.em}, {"f1", m.f1}, {"n", m.n}};
    }
    j["average"] = {{"em", report.average.em}, {"f1", report.average.f1}, {"n", report.average.n}};
    return j.dump(2) + "\n";
}

}  // namespace

std::string render_report(const MetricsReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::table: return render_table(report);
        case ReportFormat::delimited: return render_delimited(report);
        case ReportFormat::structured: return render_structured(report);
    }
    return {};
}

void emit_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report " + path.string());
    out << render_report(report, format);
    out.flush();
    if (!out) throw IoError("failed writing report " + path.string());
}

MetricsReport parse_structured_report(std::string_view text) {
    MetricsReport report;
    try {
        const auto j = nlohmann::json::parse(text);
        report.mode = eval_mode_from_string(j.at("mode").get<std::string>());
        const auto read = [](const nlohmann::json& m) {
            return DatasetMetrics{m.at("em").get<double>(), m.at("f1").get<double>(),
                                  m.at("n").get<std::size_t>()};
        };
        for (const auto& [name, m] : j.at("datasets").items()) report.per_dataset[name] = read(m);
        report.average = read(j.at("average"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
    return report;
}

}  // namespace qagent
