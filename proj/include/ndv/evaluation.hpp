#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ndv/datagen.hpp"
#include "ndv/fusion.hpp"

namespace ndv {

// max(est/truth, truth/est); both arguments must be positive.
double q_error(double est, double truth);

struct QErrorStats {
    double mean = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    double q90 = 0.0;
    double q95 = 0.0;
    double q99 = 0.0;
    std::int64_t count = 0;
};

QErrorStats aggregate(const std::vector<double>& errors);

// Precision@K: a case counts as a hit when the first K selected indices
// intersect the set of maximal-label indices; cases whose labels are all
// zero are excluded from the denominator and reported as skipped.
struct PrecisionResult {
    double precision = 0.0;
    std::int64_t evaluated = 0;
    std::int64_t skipped = 0;
};
PrecisionResult precision_at_k(std::span<const std::vector<int>> selections,
                               std::span<const std::vector<int>> labels, int K);

// Oracle that picks, per case, the base estimator with the lowest q-error.
QErrorStats hypo_optimal(std::span<const TrainSample> cases);

// Learnable-ensemble baseline: one weight per base estimator, fused over all
// m in log space with softmax-normalized weights; trained with the
// squared-log loss via Adam (no regularization).
struct LeModel {
    std::vector<double> w;
};
LeModel train_le(std::span<const TrainSample> train_set, const TrainConfig& cfg);
double le_estimate(const LeModel& model, std::span<const double> estimates,
                   double N);

struct BenchmarkOptions {
    bool baselines = true;           // 14 base estimators, hybrids, LE, oracle
    int threads = 1;
    TrainConfig le_cfg;              // lr/epochs/batch/seed for LE training
    double adandv_train_seconds = 0; // carried into the timing artifact
};

struct BenchmarkReport {
    struct MethodRow {
        std::string name;
        QErrorStats stats;
    };
    struct Timings {
        double base_estimators_s = 0.0;
        double adandv_infer_s = 0.0;
        double le_train_s = 0.0;
        double le_infer_s = 0.0;
        double adandv_train_s = 0.0;
    };

    std::vector<MethodRow> methods;
    std::int64_t test_cases = 0;
    // Ranker quality (present when a model was evaluated).
    bool has_model = false;
    PrecisionResult p_over_1, p_over_2, p_under_1, p_under_2;
    // Selection diagnostics: per-estimator pick counts aligned to
    // EstimatorId order, plus how the selected 2k estimates sit relative to
    // the truth (both sides of D, all above, or all at/below).
    std::vector<std::int64_t> over_selected;
    std::vector<std::int64_t> under_selected;
    std::int64_t comp_both = 0;
    std::int64_t comp_only_over = 0;
    std::int64_t comp_only_under = 0;
    // Per-estimator fallback rates over the test set.
    std::vector<double> sanitized_rate;
    std::vector<std::string> failed_columns;
    Timings timings;

    // Deterministic machine-readable report (no wall-clock content).
    std::string to_json() const;
    // Deterministic human-readable table (no wall-clock content).
    std::string to_table() const;
    // Wall-clock numbers, separated so the main report stays byte-stable
    // across reruns.
    std::string timings_json() const;
};

// Evaluates baselines and (optionally) a trained model on data.test; LE is
// fitted on data.train. Per-column failures are recorded, never fatal.
BenchmarkReport run_benchmark(const Dataset& data, const AdaNdvModel* model,
                              const BenchmarkOptions& opt);

}  // namespace ndv
