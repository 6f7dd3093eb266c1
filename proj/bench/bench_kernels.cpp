// Serial against OpenMP paths for the parallel kernels.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "qagent/corpus.hpp"
#include "qagent/grpo.hpp"
#include "qagent/retriever.hpp"

namespace {

using qagent::Execution;

std::string random_words(std::mt19937& rng, std::size_t n) {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (int i = 0; i < 5000; ++i) v.push_back("w" + std::to_string(i));
        return v;
    }();
    // Zipf-ish: low ids are common.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = static_cast<std::size_t>(std::pow(u(rng), 3.0) * static_cast<double>(vocab.size() - 1));
        s += (i ? " " : "") + vocab[id];
    }
    return s;
}

const qagent::Corpus& corpus() {
    static const qagent::Corpus c = [] {
        std::mt19937 rng(1);
        std::vector<qagent::Document> docs;
        for (int i = 0; i < 20000; ++i) docs.push_back({"d" + std::to_string(i), random_words(rng, 3), random_words(rng, 100)});
        return qagent::Corpus(std::move(docs));
    }();
    return c;
}

const std::vector<std::string>& queries() {
    static const std::vector<std::string> q = [] {
        std::mt19937 rng(2);
        std::vector<std::string> out;
        for (int i = 0; i < 512; ++i) out.push_back(random_words(rng, 6));
        return out;
    }();
    return q;
}

Execution mode(const benchmark::State& state) { return state.range(0) == 0 ? Execution::serial : Execution::parallel; }

void BM_BuildIndex(benchmark::State& state) {
    const auto& c = corpus();
    for (auto _ : state) benchmark::DoNotOptimize(qagent::build_index(c, {}, mode(state)));
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_BuildIndex)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RetrieveBatch(benchmark::State& state) {
    static const auto index = qagent::build_index(corpus());
    for (auto _ : state) benchmark::DoNotOptimize(qagent::retrieve_batch(index, queries(), 10, mode(state)));
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_RetrieveBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EvaluateGroups(benchmark::State& state) {
    static const std::vector<qagent::grpo::GroupTrace> groups = [] {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> lp(-5.0, -0.01), jitter(-0.3, 0.3);
        std::vector<qagent::grpo::GroupTrace> out;
        for (int g = 0; g < 256; ++g) {
            qagent::grpo::GroupTrace group;
            group.question_id = "q" + std::to_string(g);
            for (int r = 0; r < 5; ++r) {
                qagent::grpo::TokenTrace t;
                std::vector<double> ref;
                for (int k = 0; k < 1024; ++k) {
                    t.tokens.push_back("t");
                    t.logp_old.push_back(lp(rng));
                    t.logp_new.push_back(t.logp_old.back() + jitter(rng));
                    ref.push_back(t.logp_new.back() + jitter(rng));
                    t.mask.push_back(k % 7 != 0);
                }
                t.logp_ref = std::move(ref);
                group.rollouts.push_back(std::move(t));
                group.rewards.push_back(static_cast<double>(r % 2));
            }
            out.push_back(std::move(group));
        }
        return out;
    }();
    const qagent::grpo::GrpoParams params;
    for (auto _ : state) benchmark::DoNotOptimize(qagent::grpo::evaluate_groups(groups, params, mode(state)));
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}
BENCHMARK(BM_EvaluateGroups)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
