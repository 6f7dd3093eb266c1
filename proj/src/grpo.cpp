#include "qagent/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "qagent/protocol.hpp"
#include "qagent/text.hpp"

namespace qagent::grpo {

void TokenTrace::validate() const {
    const auto n = tokens.size();
    const auto check = [n](std::size_t size, const char* name) {
        if (size != n) {
            throw InvalidArgument(std::string(name) + " has " + std::to_string(size) +
                                  " entries but tokens has " + std::to_string(n));
        }
    };
    check(logp_new.size(), "logp_new");
    check(logp_old.size(), "logp_old");
    if (logp_ref) check(logp_ref->size(), "logp_ref");
    check(mask.size(), "mask");
}

std::size_t TokenTrace::unmasked() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void GroupTrace::validate() const {
    if (rollouts.size() < 2) throw InvalidArgument("a group needs at least 2 rollouts");
    if (rewards.size() != rollouts.size()) {
        throw InvalidArgument("group has " + std::to_string(rollouts.size()) + " rollouts but " +
                              std::to_string(rewards.size()) + " rewards");
    }
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        try {
            rollouts[i].validate();
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("rollout " + std::to_string(i) + ": " + e.what());
        }
    }
}

void GrpoParams::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
    if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
    if (!(sigma_floor > 0.0)) throw InvalidArgument("sigma_floor must be positive");
}

std::vector<double> group_advantages(std::span<const double> rewards, double sigma_floor) {
    if (rewards.size() < 2) throw InvalidArgument("group_advantages needs at least 2 rewards");
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double sq = 0.0;
    for (double r : rewards) sq += (r - mean) * (r - mean);
    const double sigma = std::sqrt(sq / n);

    std::vector<double> advantages(rewards.size(), 0.0);
    if (sigma < sigma_floor) return advantages;
    for (std::size_t i = 0; i < rewards.size(); ++i) advantages[i] = (rewards[i] - mean) / sigma;
    return advantages;
}

std::vector<bool> information_mask(std::string_view full_text,
                                   std::span<const std::pair<std::size_t, std::size_t>> offsets) {
    std::size_t expected = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const auto [begin, end] = offsets[i];
        if (begin != expected || end < begin) {
            throw InvalidArgument("token offsets do not tile the text: token " + std::to_string(i) +
                                  " starts at " + std::to_string(begin) + ", expected " +
                                  std::to_string(expected));
        }
        expected = end;
    }
    if (expected != full_text.size()) {
        throw InvalidArgument("token offsets cover " + std::to_string(expected) + " of " +
                              std::to_string(full_text.size()) + " characters");
    }

    const auto spans = protocol::information_spans(full_text);
    std::vector<bool> mask(offsets.size(), true);
    std::size_t s = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const auto [begin, end] = offsets[i];
        while (s < spans.size() && spans[s].second < begin) ++s;
        if (s < spans.size() && spans[s].first <= begin && end <= spans[s].second) mask[i] = false;
    }
    return mask;
}

KlEstimate kl_estimate(const TokenTrace& trace) {
    trace.validate();
    if (!trace.logp_ref) throw InvalidArgument("kl_estimate needs logp_ref");
    KlEstimate out;
    double sum = 0.0;
    for (std::size_t t = 0; t < trace.tokens.size(); ++t) {
        if (!trace.mask[t]) continue;
        const double d = (*trace.logp_ref)[t] - trace.logp_new[t];
        sum += std::exp(d) - d - 1.0;
        ++out.tokens;
    }
    out.value = out.tokens == 0 ? 0.0 : sum / static_cast<double>(out.tokens);
    return out;
}

ObjectiveResult grpo_objective(const GroupTrace& group, std::span<const double> advantages,
                               const GrpoParams& params) {
    params.validate();
    group.validate();
    if (advantages.size() != group.rollouts.size()) {
        throw InvalidArgument("got " + std::to_string(advantages.size()) + " advantages for " +
                              std::to_string(group.rollouts.size()) + " rollouts");
    }
    const bool need_ref = params.beta > 0.0;
    bool have_ref = true;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        if (!group.rollouts[i].logp_ref) {
            if (need_ref) throw InvalidArgument("rollout " + std::to_string(i) + " has no logp_ref but beta > 0");
            have_ref = false;
        }
    }

    ObjectiveResult r;
    double surrogate_sum = 0.0;
    double kl_sum = 0.0;
    double ratio_sum = 0.0;
    std::size_t clipped = 0;
    const double lo = 1.0 - params.epsilon;
    const double hi = 1.0 + params.epsilon;

    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        const TokenTrace& trace = group.rollouts[i];
        const double a = advantages[i];
        for (std::size_t t = 0; t < trace.tokens.size(); ++t) {
            if (!trace.mask[t]) continue;
            const double ratio = std::exp(trace.logp_new[t] - trace.logp_old[t]);
            const double bounded = std::clamp(ratio, lo, hi);
            surrogate_sum += std::min(ratio * a, bounded * a);
            ratio_sum += ratio;
            if (ratio < lo || ratio > hi) ++clipped;
            if (have_ref) {
                const double d = (*trace.logp_ref)[t] - trace.logp_new[t];
                kl_sum += std::exp(d) - d - 1.0;
            }
            ++r.unmasked_tokens;
        }
    }

    if (r.unmasked_tokens == 0) {
        r.notes.emplace_back("no unmasked tokens");
        return r;
    }
    if (!have_ref) r.notes.emplace_back("no reference log-probabilities; KL taken as 0");
    const double n = static_cast<double>(r.unmasked_tokens);
    r.surrogate = surrogate_sum / n;
    r.kl = kl_sum / n;
    r.mean_ratio = ratio_sum / n;
    r.clip_fraction = static_cast<double>(clipped) / n;
    r.objective = r.surrogate - params.beta * r.kl;
    return r;
}

std::vector<GroupReport> evaluate_groups(std::span<const GroupTrace> groups, const GrpoParams& params,
                                         Execution execution) {
    params.validate();
    std::vector<GroupReport> reports(groups.size());
    const auto evaluate = [&](std::size_t g) {
        GroupReport& report = reports[g];
        report.question_id = groups[g].question_id;
        report.advantages = group_advantages(groups[g].rewards, params.sigma_floor);
        report.result = grpo_objective(groups[g], report.advantages, params);
    };

    const auto n = static_cast<std::int64_t>(groups.size());
    if (execution == Execution::serial) {
        for (std::int64_t g = 0; g < n; ++g) evaluate(static_cast<std::size_t>(g));
        return reports;
    }

    // Exceptions must not escape an OpenMP region; keep the first by index.
    std::vector<std::exception_ptr> errors(groups.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t g = 0; g < n; ++g) {
        try {
            evaluate(static_cast<std::size_t>(g));
        } catch (...) {
            errors[g] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return reports;
}

namespace {

std::vector<double> number_list(const nlohmann::json& j, const char* field) {
    std::vector<double> out;
    for (const auto& v : j.at(field)) out.push_back(v.get<double>());
    return out;
}

}  // namespace

std::vector<GroupTrace> read_group_traces(std::istream& in) {
    std::vector<GroupTrace> groups;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::size_t record = groups.size();
        const std::string where = "record " + std::to_string(record) + " (line " + std::to_string(line_no) + ")";
        GroupTrace group;
        std::size_t rollout_index = 0;
        try {
            const auto j = nlohmann::json::parse(line);
            group.question_id = j.value("question_id", std::string{});
            for (const auto& r : j.at("rollouts")) {
                TokenTrace trace;
                trace.tokens = r.at("tokens").get<std::vector<std::string>>();
                trace.logp_new = number_list(r, "logp_new");
                trace.logp_old = number_list(r, "logp_old");
                if (r.contains("logp_ref") && !r.at("logp_ref").is_null()) {
                    trace.logp_ref = number_list(r, "logp_ref");
                }
                if (r.contains("mask")) {
                    for (const auto& m : r.at("mask")) trace.mask.push_back(m.get<bool>());
                } else {
                    trace.mask.assign(trace.tokens.size(), true);
                }
                group.rewards.push_back(r.at("reward").get<double>());
                trace.validate();
                group.rollouts.push_back(std::move(trace));
                ++rollout_index;
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ", rollout " + std::to_string(rollout_index) + ": " + e.what(), line_no);
        } catch (const InvalidArgument& e) {
            throw ParseError(where + ", rollout " + std::to_string(rollout_index) + ": " + e.what(), line_no);
        }
        if (group.rollouts.size() < 2) {
            throw ParseError(where + ": a group needs at least 2 rollouts", line_no);
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

void write_group_trace(const GroupTrace& group, std::ostream& out) {
    nlohmann::ordered_json j;
    j["question_id"] = group.question_id;
    j["rollouts"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        const TokenTrace& t = group.rollouts[i];
        nlohmann::ordered_json r;
        r["tokens"] = t.tokens;
        r["logp_new"] = t.logp_new;
        r["logp_old"] = t.logp_old;
        r["logp_ref"] = t.logp_ref ? nlohmann::ordered_json(*t.logp_ref) : nlohmann::ordered_json(nullptr);
        r["mask"] = t.mask;
        r["reward"] = i < group.rewards.size() ? group.rewards[i] : 0.0;
        j["rollouts"].push_back(std::move(r));
    }
    out << j.dump() << '\n';
}

}  // namespace qagent::grpo
