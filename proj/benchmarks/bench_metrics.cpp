#include <benchmark/benchmark.h>

#include "wastebench/metrics.hpp"
#include "wastebench/rng.hpp"

using namespace wastebench;

namespace {

std::vector<PredictionRecord> make_predictions(std::int64_t n) {
    CounterRng rng(42);
    std::vector<PredictionRecord> preds;
    preds.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        PredictionRecord r;
        r.filename = "img_" + std::to_string(i) + ".png";
        r.p_positive = rng.next_double();
        r.p_negative = 1.0 - r.p_positive;
        r.true_label = rng.bernoulli(0.5) ? Label::positive : Label::negative;
        preds.push_back(std::move(r));
    }
    return preds;
}

}  // namespace

static void BM_ConfusionAndMetrics(benchmark::State& state) {
    const auto preds = make_predictions(state.range(0));
    for (auto _ : state) {
        const ClassMetrics m = class_metrics(confusion(preds, Label::positive));
        benchmark::DoNotOptimize(m.f1);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConfusionAndMetrics)->Arg(1000)->Arg(10000)->Arg(100000);

static void BM_RocAuc(benchmark::State& state) {
    const auto preds = make_predictions(state.range(0));
    for (auto _ : state) {
        const double a = auc(roc_points(preds, Label::positive));
        benchmark::DoNotOptimize(a);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000)->Arg(100000);

static void BM_MicroAuc(benchmark::State& state) {
    const auto preds = make_predictions(state.range(0));
    for (auto _ : state) {
        const double a = micro_auc(preds);
        benchmark::DoNotOptimize(a);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MicroAuc)->Arg(1000)->Arg(10000);

static void BM_WholeReport(benchmark::State& state) {
    const auto preds = make_predictions(state.range(0));
    for (auto _ : state) {
        const ClassReport report = evaluate_predictions(preds);
        benchmark::DoNotOptimize(report.weighted.accuracy);
    }
}
BENCHMARK(BM_WholeReport)->Arg(10000);

BENCHMARK_MAIN();
