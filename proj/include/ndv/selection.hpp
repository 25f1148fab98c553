#pragma once

#include <span>
#include <vector>

namespace ndv {

// Per-estimator ranking labels in {0..m}. Nonzero over-labels sit exactly on
// the strict overestimators (estimate > D), nonzero under-labels exactly on
// {estimate <= D}; within each class the best estimator (closest to D) gets
// the largest label m, the next m-1, and so on. Masked entries are 0.
struct RankLabels {
    std::vector<int> y_over;
    std::vector<int> y_under;
};

std::vector<int> over_labels(std::span<const double> estimates, double D);
std::vector<int> under_labels(std::span<const double> estimates, double D);
RankLabels make_labels(std::span<const double> estimates, double D);

// Smooth position of every item under the sigmoid ranking relaxation:
// pi(i) = 1 + sum_{j != i} sigmoid(alpha * (S_j - S_i)); higher score means
// smaller (better) position. Outputs lie in [1, m].
std::vector<double> approx_positions(std::span<const double> scores,
                                     double alpha);

// Ranking loss L = -sum_i (2^{y_i} - 1) / log2(1 + pi(i)) and its exact
// gradient with respect to the scores.
struct RankLossResult {
    double loss = 0.0;
    std::vector<double> grad;
};
RankLossResult rank_loss(std::span<const double> scores,
                         std::span<const int> labels, double alpha);

// Indices of the k largest scores, descending by score; ties broken by the
// lower canonical index. 1 <= k <= m.
std::vector<int> select_top_k(std::span<const double> scores, int k);

}  // namespace ndv
