#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ndv {

// Search interval for scalar root finding. `tol` is an absolute tolerance on
// the argument (final bracket width), not on the residual.
struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
    double tol = 1e-9;
    int max_iter = 200;
};

// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double log_gamma(double x);

// Standard normal quantile for p in (0, 1). Acklam's rational approximation;
// absolute error below 1.2e-9 over the full open interval.
double normal_quantile(double p);

// Chi-square quantile via the Wilson-Hilferty cube approximation, clamped
// below at zero. Accurate to a few percent at small dof, which is all the
// uniformity gate needs; callers wanting exact tail values should use a full
// incomplete-gamma inversion instead.
double chi2_quantile(std::int64_t dof, double p);

// Numerically stable softmax (max-subtracted). Throws std::domain_error on
// empty input.
std::vector<double> softmax(std::span<const double> v);

// Nearest-rank quantile: sorts a copy ascending and returns the element at
// index ceil(p * M) - 1. p must lie in (0, 1]; input must be non-empty.
double quantile(std::vector<double> values, double p);

// Bisection on [b.lo, b.hi]. Returns nullopt when f(lo) and f(hi) have the
// same strict sign (no bracketed root). Throws std::invalid_argument on a
// malformed bracket and std::runtime_error if f evaluates to NaN. On success
// the result x satisfies |x - root| <= b.tol for some root in the bracket.
template <typename F>
std::optional<double> bisect(F&& f, const Bracket& b) {
    if (!(b.lo < b.hi)) throw std::invalid_argument("bisect: requires lo < hi");
    if (!(b.tol > 0.0)) throw std::invalid_argument("bisect: requires tol > 0");
    double lo = b.lo, hi = b.hi;
    double flo = f(lo);
    double fhi = f(hi);
    if (std::isnan(flo) || std::isnan(fhi)) {
        throw std::runtime_error("bisect: objective evaluated to NaN");
    }
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) return std::nullopt;
    for (int it = 0; it < b.max_iter && (hi - lo) > b.tol; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        const double fmid = f(mid);
        if (std::isnan(fmid)) {
            throw std::runtime_error("bisect: objective evaluated to NaN");
        }
        if (fmid == 0.0) return mid;
        if ((fmid > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return lo + 0.5 * (hi - lo);
}

}  // namespace ndv
