#include "ndv/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ndv/numerics.hpp"

namespace ndv {

namespace {

constexpr std::array<std::string_view, kNumEstimators> kNames = {
    "goodman", "gee",       "eb", "chao", "shlosser", "chao_lee", "jackknife",
    "sichel",  "bootstrap", "ht", "mom1", "mom2",     "mom3",     "sj"};

bool full_sample(const FrequencyProfile& p) { return p.n == p.N; }

double d_of(const FrequencyProfile& p) { return static_cast<double>(p.d); }

// Shared sanitation: non-finite or non-positive raw values fall back to d.
Estimate finish(double raw, const FrequencyProfile& p, bool flagged = false) {
    if (!std::isfinite(raw) || raw <= 0.0) return {d_of(p), true};
    return {raw, flagged};
}

Estimate fallback_d(const FrequencyProfile& p) { return {d_of(p), true}; }

// gamma^2 skew correction shared by ChaoLee and MoM3; requires coverage
// c_bar > 0 and n >= 2.
double gamma_sq(const FrequencyProfile& p, double c_bar) {
    if (p.n < 2) return 0.0;
    double s = 0.0;
    for (std::int64_t i = 1; i <= p.max_count(); ++i) {
        const double fi = static_cast<double>(p.f_at(i));
        if (fi == 0.0) continue;
        s += static_cast<double>(i) * static_cast<double>(i - 1) * fi;
    }
    const double n = static_cast<double>(p.n);
    const double g = (d_of(p) / c_bar) * s / (n * (n - 1.0)) - 1.0;
    return std::max(0.0, g);
}

}  // namespace

std::string_view estimator_name(EstimatorId id) {
    return kNames[static_cast<std::size_t>(id)];
}

std::optional<EstimatorId> estimator_from_name(std::string_view name) {
    for (int i = 0; i < kNumEstimators; ++i) {
        if (kNames[static_cast<std::size_t>(i)] == name) {
            return static_cast<EstimatorId>(i);
        }
    }
    return std::nullopt;
}

double hyper_h(std::int64_t N, std::int64_t n, double x) {
    const double dN = static_cast<double>(N);
    const double dn = static_cast<double>(n);
    if (x > dN - dn) return 0.0;
    if (x <= 0.0) return 1.0;
    const double ln_h = log_gamma(dN - x + 1.0) + log_gamma(dN - dn + 1.0) -
                        log_gamma(dN - dn - x + 1.0) - log_gamma(dN + 1.0);
    return std::exp(ln_h);
}

Estimate goodman(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double N = static_cast<double>(p.N);
    const double n = static_cast<double>(p.n);
    // Alternating factorial-ratio sum; every ratio goes through log-gamma so
    // only the final exp can overflow, which sanitation catches.
    double acc = d_of(p);
    for (std::int64_t i = 1; i <= p.max_count(); ++i) {
        const double fi = static_cast<double>(p.f_at(i));
        if (fi == 0.0) continue;
        const double di = static_cast<double>(i);
        const double ln_c = log_gamma(N - n + di) + log_gamma(n - di + 1.0) -
                            log_gamma(N - n) - log_gamma(n + 1.0);
        const double term = std::exp(ln_c + std::log(fi));
        acc += (i % 2 == 1) ? term : -term;
    }
    return finish(acc, p);
}

Estimate gee(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double f1 = static_cast<double>(p.f_at(1));
    const double scale =
        std::sqrt(static_cast<double>(p.N) / static_cast<double>(p.n));
    return finish(scale * f1 + (d_of(p) - f1), p);
}

Estimate eb(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double f1 = static_cast<double>(p.f_at(1));
    const double scale =
        std::sqrt(static_cast<double>(p.N) / static_cast<double>(p.n));
    return finish(scale * std::max(1.0, f1) + (d_of(p) - f1), p);
}

Estimate chao(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double f1 = static_cast<double>(p.f_at(1));
    const double f2 = static_cast<double>(p.f_at(2));
    if (f2 <= 0.0) return fallback_d(p);
    return finish(d_of(p) + f1 * f1 / (2.0 * f2), p);
}

Estimate shlosser(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double r = p.r;
    double num = 0.0;
    double den = 0.0;
    for (std::int64_t i = 1; i <= p.max_count(); ++i) {
        const double fi = static_cast<double>(p.f_at(i));
        if (fi == 0.0) continue;
        const double di = static_cast<double>(i);
        num += std::pow(1.0 - r, di) * fi;
        den += di * r * std::pow(1.0 - r, di - 1.0) * fi;
    }
    if (den <= 0.0) return fallback_d(p);
    const double f1 = static_cast<double>(p.f_at(1));
    return finish(d_of(p) + f1 * num / den, p);
}

Estimate chao_lee(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double n = static_cast<double>(p.n);
    const double f1 = static_cast<double>(p.f_at(1));
    const double c_bar = 1.0 - f1 / n;
    if (c_bar <= 0.0) return fallback_d(p);
    const double g2 = gamma_sq(p, c_bar);
    const double v = d_of(p) / c_bar + n * (1.0 - c_bar) / c_bar * g2;
    return finish(v, p);
}

Estimate jackknife1(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double n = static_cast<double>(p.n);
    const double f1 = static_cast<double>(p.f_at(1));
    return finish(d_of(p) + (n - 1.0) * f1 / n, p);
}

Estimate sichel(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double n = static_cast<double>(p.n);
    const double d = d_of(p);
    const double f1 = static_cast<double>(p.f_at(1));
    if (!(f1 > 0.0) || !(f1 < n)) return fallback_d(p);
    const double A = 2.0 * n / d - std::log(n / f1);
    const double B = 2.0 * f1 / d + std::log(n / f1);
    const auto eq = [&](double g) {
        return (1.0 + g) * std::log(g) - A * g + B;
    };
    // g = f1/n is always a root of the equation (algebraic identity); the
    // informative root, when it exists, lies strictly inside (f1/n, 1).
    const double x = f1 / n;
    Bracket b;
    b.lo = x * (1.0 + 1e-9);
    b.hi = 1.0 - 1e-9;
    b.tol = 1e-12;
    b.max_iter = 200;
    if (!(b.lo < b.hi)) return fallback_d(p);
    const auto root = bisect(eq, b);
    if (!root) return fallback_d(p);
    const double g = *root;
    const double b_hat = g * std::log(n * g / f1) / (1.0 - g);
    const double c_hat = (1.0 - g * g) / (n * g * g);
    return finish(2.0 / (b_hat * c_hat), p);
}

Estimate bootstrap(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double n = static_cast<double>(p.n);
    double acc = d_of(p);
    for (std::int64_t i = 1; i <= p.max_count(); ++i) {
        const double fi = static_cast<double>(p.f_at(i));
        if (fi == 0.0) continue;
        acc += fi * std::pow(1.0 - static_cast<double>(i) / n, n);
    }
    return finish(acc, p);
}

Estimate horvitz_thompson(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double N = static_cast<double>(p.N);
    const double n = static_cast<double>(p.n);
    double acc = 0.0;
    for (std::int64_t i = 1; i <= p.max_count(); ++i) {
        const double fi = static_cast<double>(p.f_at(i));
        if (fi == 0.0) continue;
        const double x = N * static_cast<double>(i) / n;
        const double h = hyper_h(p.N, p.n, x);
        if (h >= 1.0 - 1e-12) return fallback_d(p);
        acc += fi / (1.0 - h);
    }
    return finish(acc, p);
}

Estimate mom1(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double n = static_cast<double>(p.n);
    const double d = d_of(p);
    // Solve d = D(1 - e^{-n/D}) in t = ln D so the bisection tolerance is
    // relative in D; the bracket is [d, 1e12]. expm1 keeps the objective's
    // sign exact near the upper end, where 1 - e^{-n/D} cancels to noise and
    // would otherwise fabricate a root for root-free profiles (e.g. d = n).
    const auto eq = [&](double t) {
        const double D = std::exp(t);
        return D * -std::expm1(-n / D) - d;
    };
    Bracket b;
    b.lo = std::log(d);
    b.hi = std::log(1e12);
    b.tol = 1e-6;
    b.max_iter = 200;
    const auto root = bisect(eq, b);
    if (!root) return {static_cast<double>(p.N), true};
    return finish(std::exp(*root), p);
}

Estimate mom2(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const double N = static_cast<double>(p.N);
    const double d = d_of(p);
    // Solve d = D(1 - h_n(N/D)) in t = ln D on [d, N] (relative tolerance).
    const auto eq = [&](double t) {
        const double D = std::exp(t);
        return D * (1.0 - hyper_h(p.N, p.n, N / D)) - d;
    };
    Bracket b;
    b.lo = std::log(d);
    b.hi = std::log(N);
    b.tol = 1e-6;
    b.max_iter = 200;
    const auto root = bisect(eq, b);
    if (!root) return {N, true};
    // d = n pushes the root to the bracket top; that degenerate case is the
    // capped fallback, not a real solution.
    if (p.d == p.n) return {N, true};
    return finish(std::exp(*root), p);
}

Estimate mom3(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const Estimate base = mom2(p);
    const double n = static_cast<double>(p.n);
    const double f1 = static_cast<double>(p.f_at(1));
    const double c_bar = 1.0 - f1 / n;
    if (c_bar <= 0.0) return {base.value, true};
    const double g2 = gamma_sq(p, c_bar);
    return finish(base.value * (1.0 + g2), p, base.sanitized);
}

Estimate smoothed_jackknife(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    if (p.n <= 1) return {d_of(p), false};
    const double f1 = static_cast<double>(p.f_at(1));
    if (f1 == 0.0) return {d_of(p), false};

    const double N = static_cast<double>(p.N);
    const double n = static_cast<double>(p.n);
    const double d = d_of(p);
    const Estimate jk = jackknife1(p);

    // Equal-class-size smoothing: with D classes of size Ntil = N/D, the
    // expected number of unseen classes is D*h_n(Ntil) and the expected
    // singleton count is D*p1(Ntil), so unseen ~= f1 * h/p1 and
    //   D_SJ = d + K*f1/n  with  K = n*h_n(Ntil)/p1(Ntil),
    // where p1(x) = x*C(N-x, n-1)/C(N, n). The pilot D comes from the
    // unsmoothed first-order jackknife d/(1-(1-q)f1/n) and is refined by
    // fixed-point iteration; any numeric failure falls back to jackknife1.
    const double q = p.r;
    const double denom = 1.0 - (1.0 - q) * f1 / n;
    if (!(denom > 0.0)) return {jk.value, true};
    double D = std::clamp(d / denom, d, N);

    const double ln_choose_Nn =
        log_gamma(N + 1.0) - log_gamma(n + 1.0) - log_gamma(N - n + 1.0);
    for (int it = 0; it < 50; ++it) {
        const double ntil = N / D;
        if (ntil > N - n + 1.0) return {jk.value, true};
        const double h = hyper_h(p.N, p.n, ntil);
        const double ln_p1 = std::log(ntil) + log_gamma(N - ntil + 1.0) -
                             log_gamma(n) - log_gamma(N - ntil - n + 2.0) -
                             ln_choose_Nn;
        const double p1 = std::exp(ln_p1);
        if (!(p1 > 0.0) || !std::isfinite(p1)) return {jk.value, true};
        double next = d + f1 * h / p1;
        if (!std::isfinite(next) || next <= 0.0) return {jk.value, true};
        next = std::clamp(next, d, N);
        if (std::abs(next - D) <= 1e-9 * std::max(1.0, D)) {
            return finish(next, p);
        }
        D = next;
    }
    return {jk.value, true};
}

Estimate estimate_one(EstimatorId id, const FrequencyProfile& p) {
    switch (id) {
        case EstimatorId::Goodman: return goodman(p);
        case EstimatorId::GEE: return gee(p);
        case EstimatorId::EB: return eb(p);
        case EstimatorId::Chao: return chao(p);
        case EstimatorId::Shlosser: return shlosser(p);
        case EstimatorId::ChaoLee: return chao_lee(p);
        case EstimatorId::Jackknife: return jackknife1(p);
        case EstimatorId::Sichel: return sichel(p);
        case EstimatorId::Bootstrap: return bootstrap(p);
        case EstimatorId::HT: return horvitz_thompson(p);
        case EstimatorId::MoM1: return mom1(p);
        case EstimatorId::MoM2: return mom2(p);
        case EstimatorId::MoM3: return mom3(p);
        case EstimatorId::SJ: return smoothed_jackknife(p);
    }
    return fallback_d(p);
}

SkewStatistic skew_u(const FrequencyProfile& p) {
    SkewStatistic s;
    s.n_bar = static_cast<double>(p.n) / d_of(p);
    double u = 0.0;
    for (std::int64_t i = 1; i <= p.max_count(); ++i) {
        const double fi = static_cast<double>(p.f_at(i));
        if (fi == 0.0) continue;
        const double diff = static_cast<double>(i) - s.n_bar;
        u += fi * diff * diff / s.n_bar;
    }
    s.u = u;
    s.threshold = p.n >= 2 ? chi2_quantile(p.n - 1, 0.975) : 0.0;
    return s;
}

Estimate hyb_skew(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const SkewStatistic s = skew_u(p);
    return s.u <= s.threshold ? smoothed_jackknife(p) : shlosser(p);
}

Estimate hyb_gee(const FrequencyProfile& p) {
    if (full_sample(p)) return {d_of(p), false};
    const SkewStatistic s = skew_u(p);
    return s.u <= s.threshold ? smoothed_jackknife(p) : gee(p);
}

EstimateSet estimate_all(const FrequencyProfile& p) {
    EstimateSet set;
    set.values.resize(kNumEstimators);
    set.sanitized.resize(kNumEstimators);
    for (int i = 0; i < kNumEstimators; ++i) {
        const Estimate e = estimate_one(static_cast<EstimatorId>(i), p);
        set.values[static_cast<std::size_t>(i)] = e.value;
        set.sanitized[static_cast<std::size_t>(i)] = e.sanitized ? 1 : 0;
    }
    return set;
}

}  // namespace ndv
