#include "fundbasket/eval.hpp"
#include "fundbasket/models.hpp"
#include "fundbasket/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fundbasket;

namespace {

const PanelDataset& default_panel() {
    static const PanelDataset panel = synth::generate(synth::SynthConfig{});
    return panel;
}

}  // namespace

static void BM_RankTopK(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
    for (auto& s : scores) s = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(eval::rank_topk(scores, 20));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RankTopK)->Arg(500)->Arg(5000)->Arg(50000);

static void BM_EaseFit(benchmark::State& state) {
    const auto& p = default_panel();
    const auto split = temporal_split(p);
    for (auto _ : state) {
        models::Ease m(250.0);
        fit_on_history(m, p, split);
        benchmark::DoNotOptimize(m.weights().data());
    }
}
BENCHMARK(BM_EaseFit)->Unit(benchmark::kMillisecond);

static void BM_TifuFit(benchmark::State& state) {
    const auto& p = default_panel();
    const auto split = temporal_split(p);
    for (auto _ : state) {
        models::TifuKnn m;
        fit_on_history(m, p, split);
        benchmark::DoNotOptimize(m.pif(0).data());
    }
}
BENCHMARK(BM_TifuFit)->Unit(benchmark::kMillisecond);

static void BM_ItemKnnFit(benchmark::State& state) {
    const auto& p = default_panel();
    const auto split = temporal_split(p);
    for (auto _ : state) {
        models::ItemKnn m;
        fit_on_history(m, p, split);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_ItemKnnFit)->Unit(benchmark::kMillisecond);

static void BM_Evaluate(benchmark::State& state) {
    const auto& p = default_panel();
    const auto split = temporal_split(p);
    models::LastAllocation m;
    fit_on_history(m, p, split);
    eval::EvalOptions opt;
    opt.resamples = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate(m, p, split, split.test_target, opt));
}
BENCHMARK(BM_Evaluate)->Arg(0)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
