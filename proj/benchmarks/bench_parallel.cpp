// Microbenchmarks for the batch estimation kernels: the OpenMP path versus
// the serial reference path (threads = 1), plus single-column latency for
// the base estimator sweep and learned-model inference.

#include <benchmark/benchmark.h>

#include <vector>

#include "ndv/datagen.hpp"
#include "ndv/estimators.hpp"
#include "ndv/fusion.hpp"
#include "ndv/parallel.hpp"

namespace {

const std::vector<ndv::FrequencyProfile>& batch_profiles() {
    static const std::vector<ndv::FrequencyProfile> profiles = [] {
        std::vector<ndv::FrequencyProfile> out;
        for (int i = 0; i < 64; ++i) {
            ndv::GeneratorSpec spec;
            spec.kind = (i % 2 == 0) ? ndv::GeneratorSpec::Kind::Zipf
                                     : ndv::GeneratorSpec::Kind::Uniform;
            spec.N = 100000;
            spec.V = 10000;
            spec.s = 1.2;
            spec.seed = static_cast<std::uint64_t>(i + 1);
            out.push_back(ndv::label_column(spec, 0.01).profile);
        }
        return out;
    }();
    return profiles;
}

void run_batch(int threads) {
    const auto& profiles = batch_profiles();
    std::vector<ndv::EstimateSet> results(profiles.size());
    ndv::parallel_for(static_cast<std::int64_t>(profiles.size()), threads,
                      [&](std::int64_t i) {
        results[static_cast<std::size_t>(i)] =
            ndv::estimate_all(profiles[static_cast<std::size_t>(i)]);
    });
    benchmark::DoNotOptimize(results);
}

void BM_BatchEstimateSerial(benchmark::State& state) {
    for (auto _ : state) run_batch(1);
    state.SetItemsProcessed(
        static_cast<std::int64_t>(state.iterations()) *
        static_cast<std::int64_t>(batch_profiles().size()));
}
BENCHMARK(BM_BatchEstimateSerial)->Unit(benchmark::kMillisecond);

void BM_BatchEstimateParallel(benchmark::State& state) {
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) run_batch(threads);
    state.SetItemsProcessed(
        static_cast<std::int64_t>(state.iterations()) *
        static_cast<std::int64_t>(batch_profiles().size()));
}
BENCHMARK(BM_BatchEstimateParallel)
    ->Arg(2)
    ->Arg(4)
    ->Arg(ndv::hardware_threads())
    ->Unit(benchmark::kMillisecond);

void BM_SingleColumnEstimateAll(benchmark::State& state) {
    const auto& p = batch_profiles().front();
    for (auto _ : state) {
        auto est = ndv::estimate_all(p);
        benchmark::DoNotOptimize(est);
    }
}
BENCHMARK(BM_SingleColumnEstimateAll)->Unit(benchmark::kMicrosecond);

void BM_Inference(benchmark::State& state) {
    ndv::TrainConfig cfg;
    static const ndv::AdaNdvModel model =
        ndv::make_model(cfg, ndv::kNumEstimators);
    const auto& p = batch_profiles().front();
    for (auto _ : state) {
        auto r = ndv::infer(model, p);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_Inference)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
