#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "ndv/datagen.hpp"
#include "ndv/estimators.hpp"
#include "ndv/evaluation.hpp"
#include "ndv/fusion.hpp"
#include "ndv/neural.hpp"
#include "ndv/parallel.hpp"

using namespace ndv;

namespace {

std::vector<GeneratorSpec> specs_of(int count) {
    std::vector<GeneratorSpec> specs;
    for (int i = 0; i < count; ++i) {
        GeneratorSpec sp;
        sp.kind = i % 2 == 0 ? GeneratorSpec::Kind::Zipf
                             : GeneratorSpec::Kind::Uniform;
        sp.s = 1.5;
        sp.N = 3000 + 70 * i;
        sp.V = 280 + 15 * i;
        sp.seed = static_cast<std::uint64_t>(i + 400);
        specs.push_back(sp);
    }
    return specs;
}

std::vector<TrainSample> to_samples(const std::vector<LabeledColumn>& cols,
                                    const TrainConfig& cfg) {
    std::vector<TrainSample> out;
    for (const auto& c : cols) {
        out.push_back(make_sample(c.profile, static_cast<double>(c.D), cfg));
    }
    return out;
}

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("parallel_for touches every index exactly once") {
    for (const int threads : {1, 2, 4, 8}) {
        std::vector<int> hits(1000, 0);
        parallel_for(1000, threads,
                     [&](std::int64_t i) { ++hits[static_cast<std::size_t>(i)]; });
        for (int h : hits) CHECK(h == 1);
    }

    // Zero iterations is a no-op; negative counts are rejected up front.
    bool ran = false;
    parallel_for(0, 4, [&](std::int64_t) { ran = true; });
    CHECK(!ran);
    CHECK_THROWS_AS(parallel_for(-1, 1, [](std::int64_t) {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(parallel_for(-1, 4, [](std::int64_t) {}),
                    std::invalid_argument);

    CHECK(hardware_threads() >= 1);
}

TEST_CASE("parallel estimator bank matches the serial reference bitwise") {
    const std::vector<GeneratorSpec> specs = specs_of(40);
    std::vector<FrequencyProfile> profiles;
    for (const auto& sp : specs) {
        profiles.push_back(label_column(sp, 0.05).profile);
    }

    // Serial reference pass.
    std::vector<EstimateSet> serial(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        serial[i] = estimate_all(profiles[i]);
    }

    // Parallel pass over the same inputs.
    std::vector<EstimateSet> parallel(profiles.size());
    parallel_for(static_cast<std::int64_t>(profiles.size()), 4,
                 [&](std::int64_t i) {
                     parallel[static_cast<std::size_t>(i)] =
                         estimate_all(profiles[static_cast<std::size_t>(i)]);
                 });

    for (std::size_t i = 0; i < profiles.size(); ++i) {
        CHECK(serial[i].values == parallel[i].values);    // bitwise equality
        CHECK(serial[i].sanitized == parallel[i].sanitized);
    }
}

TEST_CASE("training is invariant to the validation thread count") {
    const Dataset data = make_dataset(specs_of(12), 0.03, 21);
    TrainConfig cfg;
    cfg.H = 20;
    cfg.k = 2;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    const std::vector<TrainSample> tr = to_samples(data.train, cfg);
    const std::vector<TrainSample> va = to_samples(data.validation, cfg);

    const FitResult one = train(tr, va, cfg, 1);
    const FitResult four = train(tr, va, cfg, 4);
    CHECK(flatten(one.model.over_ranker) == flatten(four.model.over_ranker));
    CHECK(flatten(one.model.under_ranker) == flatten(four.model.under_ranker));
    CHECK(flatten(one.model.weighter) == flatten(four.model.weighter));
    CHECK(one.model.best_epoch == four.model.best_epoch);
    CHECK(one.model.best_val_q99 == four.model.best_val_q99);
    REQUIRE(one.log.size() == four.log.size());
    for (std::size_t i = 0; i < one.log.size(); ++i) {
        CHECK(one.log[i].val_mean_q == four.log[i].val_mean_q);
        CHECK(one.log[i].val_q99 == four.log[i].val_q99);
    }
}

TEST_CASE("benchmark reports are byte-identical across thread counts") {
    const Dataset data = make_dataset(specs_of(14), 0.03, 21);
    TrainConfig cfg;
    cfg.H = 20;
    cfg.k = 2;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    const FitResult fit = train(to_samples(data.train, cfg),
                                to_samples(data.validation, cfg), cfg);

    BenchmarkOptions opt1;
    opt1.le_cfg.epochs = 5;
    opt1.le_cfg.batch_size = 8;
    opt1.threads = 1;
    BenchmarkOptions opt4 = opt1;
    opt4.threads = 4;

    const BenchmarkReport r1 = run_benchmark(data, &fit.model, opt1);
    const BenchmarkReport r4 = run_benchmark(data, &fit.model, opt4);
    CHECK(r1.to_json() == r4.to_json());
    CHECK(r1.to_table() == r4.to_table());
}

}  // TEST_SUITE
