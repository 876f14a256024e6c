#include <benchmark/benchmark.h>

#include "wastebench/models.hpp"
#include "wastebench/rng.hpp"
#include "wastebench/trainer.hpp"

using namespace wastebench;

namespace {

nn::Tensor random_batch(int b, std::uint64_t seed) {
    CounterRng rng(seed);
    nn::Tensor t({b, 3, 224, 224});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

static void BM_ToyCnnForward(benchmark::State& state) {
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 1);
    const nn::Tensor batch = random_batch(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) {
        const nn::Tensor out = forward_logprobs(model, batch);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToyCnnForward)->Arg(1)->Arg(8);

static void BM_ToyCnnTrainStep(benchmark::State& state) {
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 3);
    auto optimizer = build_optimizer({OptimizerKind::adamw, {}}, model.parameters(), 1e-3);
    const nn::Tensor batch = random_batch(8, 4);
    const std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1};
    for (auto _ : state) {
        nn::ForwardCtx ctx;
        ctx.training = true;
        CounterRng rng(5);
        ctx.rng = &rng;
        nn::NodeRef loss = nll_loss(model.forward(nn::make_constant(batch), ctx), labels,
                                    Reduction::mean);
        optimizer->zero_grad();
        nn::backward(loss);
        optimizer->step();
        benchmark::DoNotOptimize(loss->value[0]);
    }
}
BENCHMARK(BM_ToyCnnTrainStep);

static void BM_MobileNetForward(benchmark::State& state) {
    ModelHandle model = build_model({Architecture::mobilenetv2_050}, {}, 6);
    const nn::Tensor batch = random_batch(1, 7);
    for (auto _ : state) {
        const nn::Tensor out = forward_logprobs(model, batch);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_MobileNetForward)->Unit(benchmark::kMillisecond);

static void BM_ParallelEnsembleForward(benchmark::State& state) {
    ParallelEnsembleSpec spec;
    spec.backbone_a = {Architecture::toy_cnn};
    spec.backbone_b = {Architecture::toy_cnn};
    ModelHandle model = build_parallel_ensemble(spec, {}, 8);
    const nn::Tensor batch = random_batch(8, 9);
    for (auto _ : state) {
        const nn::Tensor out = forward_logprobs(model, batch);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_ParallelEnsembleForward);
