#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace ndv {

// One data column. Values are opaque dictionary-encoded tokens: equality is
// token equality and nothing else is ever assumed about them. CSV ingestion
// maps distinct cell strings to dense token ids (byte equality), so NDV is
// type-agnostic.
struct ColumnData {
    std::vector<std::int64_t> values;

    std::int64_t N() const { return static_cast<std::int64_t>(values.size()); }
};

// Ground truth from a full scan: true NDV D and the population frequency
// profile F (sparse map count-of-occurrences j -> number of values F_j).
struct ExactColumnStats {
    std::int64_t D = 0;
    std::map<std::int64_t, std::int64_t> F;
    std::int64_t N = 0;
};

// Sample statistics: f[j-1] = f_j = number of values seen exactly j times in
// the sample; d = distinct values in the sample; n = sample size; N = column
// row count; r = n/N.
struct FrequencyProfile {
    std::vector<std::int64_t> f;
    std::int64_t d = 0;
    std::int64_t n = 0;
    std::int64_t N = 0;
    double r = 0.0;

    // f_j with 1-based j; zero beyond the stored range.
    std::int64_t f_at(std::int64_t j) const {
        if (j < 1 || j > static_cast<std::int64_t>(f.size())) return 0;
        return f[static_cast<std::size_t>(j - 1)];
    }
    std::int64_t max_count() const { return static_cast<std::int64_t>(f.size()); }
};

// Throws std::domain_error if the profile violates its invariants
// (sum f_j = d, sum j*f_j = n, 1 <= d <= n <= N, r = n/N, f_j >= 0).
void check_profile(const FrequencyProfile& p);

// Draws n = max(1, round_half_up(rate * N)) values uniformly without
// replacement; deterministic given seed. rate must lie in (0, 1].
std::vector<std::int64_t> sample_uniform(const ColumnData& col, double rate,
                                         std::uint64_t seed);

// Builds the frequency profile of a nonempty sample drawn from a column of
// N rows (N >= sample size).
FrequencyProfile build_profile(std::span<const std::int64_t> sample,
                               std::int64_t N);

// Full-scan ground truth.
ExactColumnStats exact_stats(const ColumnData& col);

// Feature vector of length H: [f_1 .. f_{H-3} zero-padded or truncated,
// ln n, ln d, ln N]. With rescale, the profile prefix becomes ln(1 + f_j)
// (experiment flag; off by default everywhere). H >= 4.
std::vector<double> featurize(const FrequencyProfile& p, int H,
                              bool rescale = false);

}  // namespace ndv
