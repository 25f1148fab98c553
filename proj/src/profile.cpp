#include "ndv/profile.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "ndv/rng.hpp"

namespace ndv {

void check_profile(const FrequencyProfile& p) {
    if (p.d < 1) throw std::domain_error("profile: d must be >= 1");
    if (p.d > p.n) throw std::domain_error("profile: d must be <= n");
    if (p.n > p.N) throw std::domain_error("profile: n must be <= N");
    std::int64_t sum_f = 0;
    std::int64_t sum_jf = 0;
    for (std::size_t i = 0; i < p.f.size(); ++i) {
        const std::int64_t fj = p.f[i];
        if (fj < 0) throw std::domain_error("profile: negative f_j");
        sum_f += fj;
        sum_jf += static_cast<std::int64_t>(i + 1) * fj;
    }
    if (sum_f != p.d) throw std::domain_error("profile: sum f_j != d");
    if (sum_jf != p.n) throw std::domain_error("profile: sum j*f_j != n");
    const double r = static_cast<double>(p.n) / static_cast<double>(p.N);
    if (std::abs(p.r - r) > 1e-12) throw std::domain_error("profile: r != n/N");
}

std::vector<std::int64_t> sample_uniform(const ColumnData& col, double rate,
                                         std::uint64_t seed) {
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw std::domain_error("sample_uniform: rate must be in (0, 1]");
    }
    const std::int64_t N = col.N();
    if (N < 1) throw std::domain_error("sample_uniform: empty column");
    std::int64_t n = std::llround(rate * static_cast<double>(N));
    if (n < 1) n = 1;
    if (n > N) n = N;
    // Partial Fisher-Yates: after i swaps the prefix holds an exact uniform
    // without-replacement sample.
    std::vector<std::int64_t> work(col.values);
    Rng rng = make_rng(seed);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t j =
            i + static_cast<std::int64_t>(
                    uniform_below(rng, static_cast<std::uint64_t>(N - i)));
        std::swap(work[static_cast<std::size_t>(i)],
                  work[static_cast<std::size_t>(j)]);
    }
    work.resize(static_cast<std::size_t>(n));
    return work;
}

FrequencyProfile build_profile(std::span<const std::int64_t> sample,
                               std::int64_t N) {
    if (sample.empty()) throw std::domain_error("build_profile: empty sample");
    const std::int64_t n = static_cast<std::int64_t>(sample.size());
    if (N < n) throw std::domain_error("build_profile: N < sample size");
    std::unordered_map<std::int64_t, std::int64_t> counts;
    counts.reserve(sample.size());
    for (const std::int64_t v : sample) ++counts[v];

    std::int64_t max_count = 0;
    for (const auto& [value, c] : counts) {
        if (c > max_count) max_count = c;
    }
    FrequencyProfile p;
    p.f.assign(static_cast<std::size_t>(max_count), 0);
    for (const auto& [value, c] : counts) {
        ++p.f[static_cast<std::size_t>(c - 1)];
    }
    p.d = static_cast<std::int64_t>(counts.size());
    p.n = n;
    p.N = N;
    p.r = static_cast<double>(n) / static_cast<double>(N);
    return p;
}

ExactColumnStats exact_stats(const ColumnData& col) {
    ExactColumnStats s;
    s.N = col.N();
    std::unordered_map<std::int64_t, std::int64_t> counts;
    counts.reserve(col.values.size());
    for (const std::int64_t v : col.values) ++counts[v];
    s.D = static_cast<std::int64_t>(counts.size());
    for (const auto& [value, c] : counts) ++s.F[c];
    return s;
}

std::vector<double> featurize(const FrequencyProfile& p, int H, bool rescale) {
    if (H < 4) throw std::domain_error("featurize: H must be >= 4");
    std::vector<double> x(static_cast<std::size_t>(H), 0.0);
    const int prefix = H - 3;
    for (int j = 1; j <= prefix; ++j) {
        const double fj = static_cast<double>(p.f_at(j));
        x[static_cast<std::size_t>(j - 1)] =
            rescale ? std::log1p(fj) : fj;
    }
    x[static_cast<std::size_t>(H - 3)] = std::log(static_cast<double>(p.n));
    x[static_cast<std::size_t>(H - 2)] = std::log(static_cast<double>(p.d));
    x[static_cast<std::size_t>(H - 1)] = std::log(static_cast<double>(p.N));
    return x;
}

}  // namespace ndv
