#include <benchmark/benchmark.h>

#include "wastebench/pipeline.hpp"
#include "wastebench/rng.hpp"

using namespace wastebench;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    CounterRng rng(seed);
    Image img(h, w, 3);
    for (int i = 0; i < h * w * 3; ++i) img.data()[i] = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

}  // namespace

static void BM_Standardize(benchmark::State& state) {
    const Image img = random_image(512, 512, 1);
    for (auto _ : state) {
        const Image out = standardize(img);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_Standardize);

static void BM_ModelInput(benchmark::State& state) {
    const Image img = random_image(256, 256, 2);
    const NormalizationStats stats{{0.3201, 0.3334, 0.2832}, {0.2004, 0.1818, 0.1764}};
    for (auto _ : state) {
        const nn::Tensor t = model_input(img, stats);
        benchmark::DoNotOptimize(t.data());
    }
}
BENCHMARK(BM_ModelInput);

static void BM_ApplyAugmentation(benchmark::State& state) {
    const Image img = random_image(256, 256, 3);
    int i = 0;
    for (auto _ : state) {
        const AugmentationSpec spec = sample_augmentation(7, "bench_" + std::to_string(i++), 0);
        const Image out = apply_augmentation(img, spec);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_ApplyAugmentation);

static void BM_SampleAugmentation(benchmark::State& state) {
    int i = 0;
    for (auto _ : state) {
        const AugmentationSpec spec = sample_augmentation(7, "bench_" + std::to_string(i++), 3);
        benchmark::DoNotOptimize(spec.rotation_degrees);
    }
}
BENCHMARK(BM_SampleAugmentation);
