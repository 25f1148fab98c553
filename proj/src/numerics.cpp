#include "ndv/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace ndv {

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
    return std::lgamma(x);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("normal_quantile: requires p in (0, 1)");
    }
    // Acklam's inverse-normal rational approximation.
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    const double p_high = 1.0 - p_low;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > p_high) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double chi2_quantile(std::int64_t dof, double p) {
    if (dof < 1) throw std::domain_error("chi2_quantile: requires dof >= 1");
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("chi2_quantile: requires p in (0, 1)");
    }
    const double z = normal_quantile(p);
    const double nu = static_cast<double>(dof);
    const double t = 2.0 / (9.0 * nu);
    const double v = 1.0 - t + z * std::sqrt(t);
    return std::max(0.0, nu * v * v * v);
}

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw std::domain_error("softmax: empty input");
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::domain_error("quantile: empty input");
    if (!(p > 0.0 && p <= 1.0)) {
        throw std::domain_error("quantile: requires p in (0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double m = static_cast<double>(values.size());
    std::size_t idx = static_cast<std::size_t>(std::ceil(p * m));
    if (idx > values.size()) idx = values.size();
    if (idx == 0) idx = 1;
    return values[idx - 1];
}

}  // namespace ndv
