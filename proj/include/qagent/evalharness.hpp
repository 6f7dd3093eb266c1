#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qagent/rewards.hpp"
#include "qagent/rollout.hpp"
#include "qagent/trace.hpp"

namespace qagent {

struct EvalExample {
    std::string id;
    std::string question;
    GoldAnswerSet golden_answers;
};

/// JSON lines with "id", "question" and "golden_answers" (list of strings).
/// An empty file gives an empty list and a warning.
std::vector<EvalExample> load_dataset(const std::filesystem::path& path);
std::vector<EvalExample> read_dataset(std::istream& in);

struct Dataset {
    std::string name;
    std::vector<EvalExample> examples;
};

enum class EvalMode { end_to_end, submodule };

std::string_view to_string(EvalMode mode);
/// Throws InvalidArgument for anything but "end_to_end" or "submodule".
EvalMode eval_mode_from_string(std::string_view name);

struct DatasetMetrics {
    double em = 0.0;  // percent
    double f1 = 0.0;  // percent
    std::size_t n = 0;

    bool operator==(const DatasetMetrics&) const = default;
};

struct MetricsReport {
    EvalMode mode = EvalMode::end_to_end;
    std::map<std::string, DatasetMetrics> per_dataset;
    DatasetMetrics average;  // unweighted over datasets with n > 0; n is the total

    bool operator==(const MetricsReport&) const = default;
};

struct EvalOptions {
    RolloutConfig rollout;
    EvalMode mode = EvalMode::end_to_end;
    std::size_t concurrency = 8;
    /// true: a failed episode scores zero. false: it is left out of the means.
    bool fail_open = true;
};

struct ExampleOutcome {
    std::string dataset;
    std::string id;
    std::optional<std::string> prediction;
    double em = 0.0;
    double f1 = 0.0;
    std::optional<std::string> error;
    TraceRecord trace;
};

struct EvalRun {
    MetricsReport report;
    std::vector<ExampleOutcome> outcomes;  // sorted by dataset, then id
    std::size_t failed = 0;

    bool any_failed() const noexcept { return failed > 0; }
};

/// Runs one episode per example, up to `concurrency` at a time, then scores
/// in id order. end_to_end scores the agent's answer and never touches the
/// generator; submodule scores the generator's answer from the passage set
/// and requires one.
EvalRun evaluate(std::span<const Dataset> datasets, const Policy& policy, const Retriever& retriever,
                 const Generator* generator, const EvalOptions& options);

enum class ReportFormat { table, delimited, structured };

std::string_view to_string(ReportFormat format);
ReportFormat report_format_from_string(std::string_view name);

std::string render_report(const MetricsReport& report, ReportFormat format);
/// Throws IoError when the file cannot be written.
void emit_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path);
/// Reads the structured form back.
MetricsReport parse_structured_report(std::string_view text);

}  // namespace qagent
