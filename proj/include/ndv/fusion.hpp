#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ndv/estimators.hpp"
#include "ndv/neural.hpp"
#include "ndv/profile.hpp"

namespace ndv {

struct TrainConfig {
    double alpha = 1.0;
    double beta = 0.5;
    int k = 2;
    int H = 100;
    double lr = 1e-3;
    int epochs = 100;
    double lambda = 1e-4;
    int batch_size = 256;
    std::uint64_t seed = 42;
    bool feature_rescale = false;
};

// One dataset row: feature vector (length H), the m sanitized base
// estimates, ground truth D and the column row count N (used only to clamp
// the final output).
struct TrainSample {
    std::vector<double> x;
    std::vector<double> estimates;
    std::vector<std::uint8_t> sanitized;
    double D = 0.0;
    double N = 0.0;
};

// The deployable bundle: two rankers (H -> 128 -> 64 -> m) and the weighter
// (H + 2k -> 128 -> 64 -> 2k), plus the configuration they were built with.
struct AdaNdvModel {
    MlpModel over_ranker;
    MlpModel under_ranker;
    MlpModel weighter;
    TrainConfig config;
    int m = kNumEstimators;
    int best_epoch = 0;
    double best_val_q99 = 0.0;
};

AdaNdvModel make_model(const TrainConfig& cfg, int m);

// Builds a TrainSample from a profile: estimate_all + featurize.
TrainSample make_sample(const FrequencyProfile& p, double D,
                        const TrainConfig& cfg);

// Fusion features x' = [x, ln(selected over estimates), ln(selected under
// estimates)], length H + 2k.
std::vector<double> fusion_features(std::span<const double> x,
                                    std::span<const double> estimates,
                                    std::span<const int> over_idx,
                                    std::span<const int> under_idx);

// exp(sum_j lambda_j * log_estimates_j); weights must be a distribution over
// the 2k selected log-estimates. No clamping here.
double fuse_with_weights(std::span<const double> lambda,
                         std::span<const double> log_estimates);

// Squared-log fusion loss: mean((ln_dhat - ln_d)^2) + lambda * ||W||_2 where
// W are the weighter's parameters (Euclidean norm, not squared).
double est_loss(std::span<const double> ln_dhat, std::span<const double> ln_d,
                const MlpModel& weighter, double lambda);

// Joint objective composition: over + under + beta * est.
double total_loss(double l_over, double l_under, double l_est, double beta);

struct LossComponents {
    double over = 0.0;
    double under = 0.0;
    double est = 0.0;
    double total = 0.0;
};

// Batch loss and gradients of the joint objective. Rankers receive gradient
// only from their ranking losses (top-k selection is hard and blocks
// gradient flow); the weighter receives beta * dL_est. batch_loss is the
// forward-only counterpart and returns exactly the values batch_gradients
// reports.
LossComponents batch_gradients(const AdaNdvModel& model,
                               std::span<const TrainSample> batch,
                               MlpGrads& g_over, MlpGrads& g_under,
                               MlpGrads& g_weighter);
LossComponents batch_loss(const AdaNdvModel& model,
                          std::span<const TrainSample> batch);

struct InferResult {
    double value = 0.0;  // clamped to [1, N]
    double raw = 0.0;    // pre-clamp fused value
    std::vector<int> over_idx;
    std::vector<int> under_idx;
    std::vector<double> lambda;
    std::vector<double> s_over;
    std::vector<double> s_under;
};

InferResult infer_sample(const AdaNdvModel& model, const TrainSample& s);
InferResult infer(const AdaNdvModel& model, const FrequencyProfile& p);

struct EpochLog {
    int epoch = 0;
    double l_over = 0.0;
    double l_under = 0.0;
    double l_est = 0.0;
    double val_mean_q = 0.0;
    double val_q99 = 0.0;
};

struct FitResult {
    AdaNdvModel model;  // epoch-best checkpoint by validation q99
    std::vector<EpochLog> log;
    double train_seconds = 0.0;
};

// Full training loop: per batch one Adam step per network; after each epoch
// a full validation pass; returns the epoch with the (strictly) best
// validation 99%-quantile q-error. Bit-reproducible given (data, config).
// `init`, when given, seeds the weights from an existing model instead of a
// fresh Glorot draw (checkpoint resume); its m/H/k must match cfg.
FitResult train(const std::vector<TrainSample>& train_set,
                const std::vector<TrainSample>& val_set,
                const TrainConfig& cfg, int threads = 1,
                const AdaNdvModel* init = nullptr);

// Versioned binary checkpoint (magic, config echo, canonical estimator
// names, raw little-endian parameter arrays). save -> load -> save is
// byte-identical; malformed files raise data_error with the reason.
void save_checkpoint(const std::string& path, const AdaNdvModel& model);
AdaNdvModel load_checkpoint(const std::string& path);

}  // namespace ndv
