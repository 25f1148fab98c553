#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ndv/profile.hpp"

namespace ndv {

// Canonical estimator order. This order is stable across the whole system
// and is persisted in checkpoints; never reorder or renumber.
enum class EstimatorId : int {
    Goodman = 0,
    GEE = 1,
    EB = 2,
    Chao = 3,
    Shlosser = 4,
    ChaoLee = 5,
    Jackknife = 6,
    Sichel = 7,
    Bootstrap = 8,
    HT = 9,
    MoM1 = 10,
    MoM2 = 11,
    MoM3 = 12,
    SJ = 13,
};

inline constexpr int kNumEstimators = 14;

// Lower-case stable names in canonical order, used by the CLI, manifests and
// checkpoints.
std::string_view estimator_name(EstimatorId id);
std::optional<EstimatorId> estimator_from_name(std::string_view name);

// One sanitized estimate. `sanitized` is true when the raw result was
// non-finite/non-positive or a documented fallback path fired (the value then
// is the fallback: usually d, or N for the MoM no-root cap).
struct Estimate {
    double value = 0.0;
    bool sanitized = false;
};

// The m = 14 base estimates for one profile, aligned to EstimatorId order.
// After sanitation every value is finite and > 0.
struct EstimateSet {
    std::vector<double> values;
    std::vector<std::uint8_t> sanitized;
};

// Chi-square uniformity statistic for the hybrid gate:
// u = sum_j f_j * (j - n_bar)^2 / n_bar with n_bar = n/d, compared against
// the 0.975 chi-square quantile at n-1 degrees of freedom.
struct SkewStatistic {
    double u = 0.0;
    double n_bar = 0.0;
    double threshold = 0.0;
};

// The fourteen base estimators. All honor the full-sample convention
// (n = N returns d unflagged) and the shared sanitation contract.
Estimate goodman(const FrequencyProfile& p);
Estimate gee(const FrequencyProfile& p);
Estimate eb(const FrequencyProfile& p);
Estimate chao(const FrequencyProfile& p);
Estimate shlosser(const FrequencyProfile& p);
Estimate chao_lee(const FrequencyProfile& p);
Estimate jackknife1(const FrequencyProfile& p);
Estimate sichel(const FrequencyProfile& p);
Estimate bootstrap(const FrequencyProfile& p);
Estimate horvitz_thompson(const FrequencyProfile& p);
Estimate mom1(const FrequencyProfile& p);
Estimate mom2(const FrequencyProfile& p);
Estimate mom3(const FrequencyProfile& p);
Estimate smoothed_jackknife(const FrequencyProfile& p);

Estimate estimate_one(EstimatorId id, const FrequencyProfile& p);

SkewStatistic skew_u(const FrequencyProfile& p);

// Hybrids (evaluation baselines, not members of the base set): when the
// sample looks uniform (u <= threshold, inclusive) both return the smoothed
// jackknife; otherwise hyb_skew takes Shlosser and hyb_gee takes GEE.
Estimate hyb_skew(const FrequencyProfile& p);
Estimate hyb_gee(const FrequencyProfile& p);

// Runs all 14 base estimators; never fails (worst case everything is the
// flagged fallback d).
EstimateSet estimate_all(const FrequencyProfile& p);

// Hypergeometric no-show kernel shared by HT, MoM2 and the smoothed
// jackknife: h_n(x) = C(N-x, n) / C(N, n) evaluated through log-gamma for
// real x; zero when x > N - n. Exposed for tests.
double hyper_h(std::int64_t N, std::int64_t n, double x);

}  // namespace ndv
