#include "ndv/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ndv {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Stable argsort positions: out[i] = position of item i when the values are
// ordered by `less` (ties keep the lower index first).
template <typename Less>
std::vector<int> positions(const std::vector<double>& v, Less less) {
    std::vector<int> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return less(v[static_cast<std::size_t>(a)],
                    v[static_cast<std::size_t>(b)]);
    });
    std::vector<int> pos(v.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        pos[static_cast<std::size_t>(order[rank])] = static_cast<int>(rank);
    }
    return pos;
}

}  // namespace

std::vector<int> over_labels(std::span<const double> estimates, double D) {
    const int m = static_cast<int>(estimates.size());
    // Mask trick: shift every non-overestimate above everything real, rank
    // ascending so the smallest true overestimate (closest to D) sits first
    // and earns label m, then zero the shifted entries.
    double mx = 0.0;
    for (double e : estimates) mx = std::max(mx, e);
    std::vector<double> shifted(estimates.begin(), estimates.end());
    std::vector<bool> masked(estimates.size(), false);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        if (shifted[i] <= D) {
            shifted[i] += mx;
            masked[i] = true;
        }
    }
    const std::vector<int> pos =
        positions(shifted, [](double a, double b) { return a < b; });
    std::vector<int> y(estimates.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = masked[i] ? 0 : m - pos[i];
    }
    return y;
}

std::vector<int> under_labels(std::span<const double> estimates, double D) {
    const int m = static_cast<int>(estimates.size());
    // Mirror construction: shift overestimates below everything real, rank
    // descending so the largest underestimate (closest to D) earns label m.
    double mx = 0.0;
    for (double e : estimates) mx = std::max(mx, e);
    std::vector<double> shifted(estimates.begin(), estimates.end());
    std::vector<bool> masked(estimates.size(), false);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        if (shifted[i] > D) {
            shifted[i] -= mx + 1.0;
            masked[i] = true;
        }
    }
    const std::vector<int> pos =
        positions(shifted, [](double a, double b) { return a > b; });
    std::vector<int> y(estimates.size(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = masked[i] ? 0 : m - pos[i];
    }
    return y;
}

RankLabels make_labels(std::span<const double> estimates, double D) {
    return {over_labels(estimates, D), under_labels(estimates, D)};
}

std::vector<double> approx_positions(std::span<const double> scores,
                                     double alpha) {
    const std::size_t m = scores.size();
    std::vector<double> pi(m, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            pi[i] += sigmoid(alpha * (scores[j] - scores[i]));
        }
    }
    return pi;
}

RankLossResult rank_loss(std::span<const double> scores,
                         std::span<const int> labels, double alpha) {
    if (scores.size() != labels.size()) {
        throw std::domain_error("rank_loss: scores/labels size mismatch");
    }
    const std::size_t m = scores.size();
    const double ln2 = std::log(2.0);
    const std::vector<double> pi = approx_positions(scores, alpha);

    RankLossResult out;
    out.grad.assign(m, 0.0);
    // g[i] = dL/d pi(i); with T = log2(1+pi), L = -sum a_i/T_i:
    // dL/dpi_i = a_i / (T_i^2 (1+pi_i) ln 2).
    std::vector<double> g(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double a = std::pow(2.0, static_cast<double>(labels[i])) - 1.0;
        const double t = std::log2(1.0 + pi[i]);
        out.loss -= a / t;
        g[i] = a / (t * t * (1.0 + pi[i]) * ln2);
    }
    // dL/dS_k = alpha * sum_{i != k} sigmoid'(alpha(S_k - S_i)) (g_i - g_k),
    // using that sigmoid' is even.
    for (std::size_t k = 0; k < m; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == k) continue;
            const double s = sigmoid(alpha * (scores[k] - scores[i]));
            acc += s * (1.0 - s) * (g[i] - g[k]);
        }
        out.grad[k] = alpha * acc;
    }
    return out;
}

std::vector<int> select_top_k(std::span<const double> scores, int k) {
    const int m = static_cast<int>(scores.size());
    if (k < 1 || k > m) throw std::domain_error("select_top_k: need 1 <= k <= m");
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] >
               scores[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

}  // namespace ndv
