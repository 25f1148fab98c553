#include "ndv/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ndv/errors.hpp"
#include "ndv/estimators.hpp"
#include "ndv/numerics.hpp"
#include "ndv/parallel.hpp"
#include "ndv/rng.hpp"
#include "ndv/selection.hpp"

namespace ndv {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

// Fixed-precision decimal formatting so report bytes do not depend on
// locale or floating-point printing quirks.
std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return std::string(buf);
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

void append_stats(std::ostringstream& os, const QErrorStats& s) {
    os << "{\"count\":" << s.count << ",\"mean\":" << fmt(s.mean)
       << ",\"q50\":" << fmt(s.q50) << ",\"q75\":" << fmt(s.q75)
       << ",\"q90\":" << fmt(s.q90) << ",\"q95\":" << fmt(s.q95)
       << ",\"q99\":" << fmt(s.q99) << "}";
}

void append_precision(std::ostringstream& os, const PrecisionResult& p) {
    os << "{\"evaluated\":" << p.evaluated << ",\"precision\":"
       << fmt(p.precision) << ",\"skipped\":" << p.skipped << "}";
}

}  // namespace

double q_error(double est, double truth) {
    if (!(est > 0.0) || !(truth > 0.0)) {
        throw std::domain_error("q_error: arguments must be positive");
    }
    return std::max(est / truth, truth / est);
}

QErrorStats aggregate(const std::vector<double>& errors) {
    QErrorStats s;
    s.count = static_cast<std::int64_t>(errors.size());
    if (errors.empty()) return s;
    s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) /
             static_cast<double>(errors.size());
    s.q50 = quantile(errors, 0.50);
    s.q75 = quantile(errors, 0.75);
    s.q90 = quantile(errors, 0.90);
    s.q95 = quantile(errors, 0.95);
    s.q99 = quantile(errors, 0.99);
    return s;
}

PrecisionResult precision_at_k(std::span<const std::vector<int>> selections,
                               std::span<const std::vector<int>> labels, int K) {
    if (selections.size() != labels.size()) {
        throw std::domain_error("precision_at_k: size mismatch");
    }
    if (K < 1) throw std::domain_error("precision_at_k: K must be >= 1");
    PrecisionResult out;
    std::int64_t hits = 0;
    for (std::size_t c = 0; c < selections.size(); ++c) {
        const auto& y = labels[c];
        int best = 0;
        for (int v : y) best = std::max(best, v);
        if (best <= 0) {
            ++out.skipped;
            continue;
        }
        ++out.evaluated;
        const auto& sel = selections[c];
        const std::size_t take =
            std::min(sel.size(), static_cast<std::size_t>(K));
        bool hit = false;
        for (std::size_t i = 0; i < take && !hit; ++i) {
            const int idx = sel[i];
            if (idx >= 0 && idx < static_cast<int>(y.size()) &&
                y[idx] == best) {
                hit = true;
            }
        }
        if (hit) ++hits;
    }
    if (out.evaluated > 0) {
        out.precision =
            static_cast<double>(hits) / static_cast<double>(out.evaluated);
    }
    return out;
}

QErrorStats hypo_optimal(std::span<const TrainSample> cases) {
    std::vector<double> errs;
    errs.reserve(cases.size());
    for (const auto& s : cases) {
        double best = std::numeric_limits<double>::infinity();
        for (double est : s.estimates) {
            best = std::min(best, q_error(est, static_cast<double>(s.D)));
        }
        errs.push_back(best);
    }
    return aggregate(errs);
}

LeModel train_le(std::span<const TrainSample> train_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("train_le: empty set");
    const int m = static_cast<int>(train_set.front().estimates.size());
    LeModel model;
    model.w.assign(static_cast<std::size_t>(m), 0.0);

    // Adam state over the single weight vector.
    std::vector<double> mw(model.w.size(), 0.0), vw(model.w.size(), 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    int step = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> lam, t, grad(model.w.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng = make_rng(cfg.seed, 2000 + epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[uniform_below(rng, i)]);
        }
        for (std::size_t off = 0; off < order.size();
             off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(
                order.size(), off + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t oi = off; oi < end; ++oi) {
                const TrainSample& s = train_set[order[oi]];
                lam = softmax(model.w);
                t.resize(s.estimates.size());
                double ln_hat = 0.0;
                for (std::size_t j = 0; j < s.estimates.size(); ++j) {
                    t[j] = std::log(s.estimates[j]);
                    ln_hat += lam[j] * t[j];
                }
                const double resid = ln_hat - std::log(static_cast<double>(s.D));
                // d(ln_hat)/dw_j = lam_j * (t_j - ln_hat)
                for (std::size_t j = 0; j < model.w.size(); ++j) {
                    grad[j] += 2.0 * resid * lam[j] * (t[j] - ln_hat);
                }
            }
            const double inv = 1.0 / static_cast<double>(end - off);
            ++step;
            const double bc1 = 1.0 - std::pow(b1, step);
            const double bc2 = 1.0 - std::pow(b2, step);
            for (std::size_t j = 0; j < model.w.size(); ++j) {
                const double g = grad[j] * inv;
                if (!std::isfinite(g)) {
                    throw std::runtime_error("train_le: non-finite gradient");
                }
                mw[j] = b1 * mw[j] + (1.0 - b1) * g;
                vw[j] = b2 * vw[j] + (1.0 - b2) * g * g;
                model.w[j] -= cfg.lr * (mw[j] / bc1) /
                              (std::sqrt(vw[j] / bc2) + eps);
            }
        }
    }
    return model;
}

double le_estimate(const LeModel& model, std::span<const double> estimates,
                   double N) {
    if (model.w.size() != estimates.size()) {
        throw std::domain_error("le_estimate: weight/estimate size mismatch");
    }
    const std::vector<double> lam = softmax(model.w);
    double ln_hat = 0.0;
    for (std::size_t j = 0; j < estimates.size(); ++j) {
        ln_hat += lam[j] * std::log(estimates[j]);
    }
    // Like the learned fuser, the baseline's output is clamped to the
    // feasible range [1, N] at inference time.
    return std::clamp(std::exp(ln_hat), 1.0, std::max(1.0, N));
}

std::string BenchmarkReport::to_json() const {
    std::ostringstream os;
    os << "{";
    os << "\"composition\":{\"both\":" << comp_both
       << ",\"only_over\":" << comp_only_over
       << ",\"only_under\":" << comp_only_under << "}";
    os << ",\"failed_columns\":[";
    for (std::size_t i = 0; i < failed_columns.size(); ++i) {
        if (i) os << ",";
        os << "\"" << json_escape(failed_columns[i]) << "\"";
    }
    os << "]";
    os << ",\"has_model\":" << (has_model ? "true" : "false");
    os << ",\"methods\":{";
    // Methods are emitted sorted by name for byte-stable output.
    std::vector<std::size_t> idx(methods.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return methods[a].name < methods[b].name;
    });
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) os << ",";
        os << "\"" << json_escape(methods[idx[i]].name) << "\":";
        append_stats(os, methods[idx[i]].stats);
    }
    os << "}";
    if (has_model) {
        os << ",\"precision\":{";
        os << "\"over_at_1\":";
        append_precision(os, p_over_1);
        os << ",\"over_at_2\":";
        append_precision(os, p_over_2);
        os << ",\"under_at_1\":";
        append_precision(os, p_under_1);
        os << ",\"under_at_2\":";
        append_precision(os, p_under_2);
        os << "}";
    }
    os << ",\"sanitized_rate\":{";
    for (std::size_t j = 0; j < sanitized_rate.size(); ++j) {
        if (j) os << ",";
        os << "\"" << estimator_name(static_cast<EstimatorId>(j))
           << "\":" << fmt(sanitized_rate[j]);
    }
    os << "}";
    os << ",\"selected\":{\"over\":{";
    for (std::size_t j = 0; j < over_selected.size(); ++j) {
        if (j) os << ",";
        os << "\"" << estimator_name(static_cast<EstimatorId>(j))
           << "\":" << over_selected[j];
    }
    os << "},\"under\":{";
    for (std::size_t j = 0; j < under_selected.size(); ++j) {
        if (j) os << ",";
        os << "\"" << estimator_name(static_cast<EstimatorId>(j))
           << "\":" << under_selected[j];
    }
    os << "}}";
    os << ",\"test_cases\":" << test_cases;
    os << "}";
    return os.str();
}

std::string BenchmarkReport::to_table() const {
    std::ostringstream os;
    os << "method            mean      q50      q75      q90      q95      q99    count\n";
    os << "-----------------------------------------------------------------------------\n";
    std::vector<std::size_t> idx(methods.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return methods[a].stats.mean < methods[b].stats.mean;
    });
    for (std::size_t i : idx) {
        const auto& row = methods[i];
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%-14s %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f %8lld\n",
                      row.name.c_str(), row.stats.mean, row.stats.q50,
                      row.stats.q75, row.stats.q90, row.stats.q95,
                      row.stats.q99,
                      static_cast<long long>(row.stats.count));
        os << buf;
    }
    if (has_model) {
        os << "\nranker precision (hit rate on best-labelled estimator)\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "  over : P@1=%.4f P@2=%.4f (evaluated %lld, skipped %lld)\n",
                      p_over_1.precision, p_over_2.precision,
                      static_cast<long long>(p_over_1.evaluated),
                      static_cast<long long>(p_over_1.skipped));
        os << buf;
        std::snprintf(buf, sizeof(buf),
                      "  under: P@1=%.4f P@2=%.4f (evaluated %lld, skipped %lld)\n",
                      p_under_1.precision, p_under_2.precision,
                      static_cast<long long>(p_under_1.evaluated),
                      static_cast<long long>(p_under_1.skipped));
        os << buf;
        std::snprintf(buf, sizeof(buf),
                      "  composition: both=%lld only_over=%lld only_under=%lld\n",
                      static_cast<long long>(comp_both),
                      static_cast<long long>(comp_only_over),
                      static_cast<long long>(comp_only_under));
        os << buf;
    }
    if (!failed_columns.empty()) {
        os << "\nfailed columns: " << failed_columns.size() << "\n";
    }
    return os.str();
}

std::string BenchmarkReport::timings_json() const {
    std::ostringstream os;
    os << "{";
    os << "\"adandv_infer_s\":" << fmt(timings.adandv_infer_s);
    os << ",\"adandv_train_s\":" << fmt(timings.adandv_train_s);
    os << ",\"base_estimators_s\":" << fmt(timings.base_estimators_s);
    os << ",\"le_infer_s\":" << fmt(timings.le_infer_s);
    os << ",\"le_train_s\":" << fmt(timings.le_train_s);
    os << "}";
    return os.str();
}

BenchmarkReport run_benchmark(const Dataset& data, const AdaNdvModel* model,
                              const BenchmarkOptions& opt) {
    if (data.test.empty()) {
        throw data_error("run_benchmark: empty test split");
    }
    BenchmarkReport rep;
    rep.timings.adandv_train_s = opt.adandv_train_seconds;
    const std::size_t n_cases = data.test.size();

    // Per-case state, filled in parallel and reduced serially.
    struct CaseResult {
        bool ok = false;
        std::string error;
        EstimateSet est;
        std::vector<double> base_q;          // per-estimator q-error
        double hyb_skew_q = 0, hyb_gee_q = 0, hypo_q = 0;
        double adandv_q = 0;
        double infer_s = 0;
        std::vector<int> over_sel, under_sel;
        std::vector<int> over_y, under_y;
        bool sel_any_over = false, sel_any_under = false;
    };
    std::vector<CaseResult> results(n_cases);

    const double t0 = now_seconds();
    parallel_for(static_cast<std::int64_t>(n_cases), opt.threads,
                 [&](std::int64_t ci) {
        CaseResult& r = results[static_cast<std::size_t>(ci)];
        const LabeledColumn& col = data.test[static_cast<std::size_t>(ci)];
        try {
            const double D = static_cast<double>(col.D);
            r.est = estimate_all(col.profile);
            r.base_q.resize(r.est.values.size());
            for (std::size_t j = 0; j < r.est.values.size(); ++j) {
                r.base_q[j] = q_error(r.est.values[j], D);
            }
            r.hyb_skew_q = q_error(hyb_skew(col.profile).value, D);
            r.hyb_gee_q = q_error(hyb_gee(col.profile).value, D);
            r.hypo_q = *std::min_element(r.base_q.begin(), r.base_q.end());
            if (model) {
                const double ti = now_seconds();
                const InferResult inf = infer(*model, col.profile);
                r.infer_s = now_seconds() - ti;
                r.adandv_q = q_error(inf.value, D);
                r.over_sel = inf.over_idx;
                r.under_sel = inf.under_idx;
                // Classify the selected 2k estimates against the truth: an
                // estimate > D counts as over, <= D as under (the same
                // convention the ranking labels use).
                for (const auto* sel : {&r.over_sel, &r.under_sel}) {
                    for (int j : *sel) {
                        const double v =
                            r.est.values[static_cast<std::size_t>(j)];
                        (v > D ? r.sel_any_over : r.sel_any_under) = true;
                    }
                }
                const RankLabels y = make_labels(
                    std::span<const double>(r.est.values), D);
                r.over_y = y.y_over;
                r.under_y = y.y_under;
            }
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = col.provenance + ": " + e.what();
        }
    });
    rep.timings.base_estimators_s = now_seconds() - t0;

    const int m = kNumEstimators;
    std::vector<std::vector<double>> base_errs(static_cast<std::size_t>(m));
    std::vector<double> hskew, hgee, hypo, ada;
    std::vector<std::int64_t> sanitized_count(static_cast<std::size_t>(m), 0);
    rep.over_selected.assign(static_cast<std::size_t>(m), 0);
    rep.under_selected.assign(static_cast<std::size_t>(m), 0);
    std::vector<std::vector<int>> over_sels, under_sels, over_ys, under_ys;

    for (const CaseResult& r : results) {
        if (!r.ok) {
            rep.failed_columns.push_back(r.error);
            continue;
        }
        ++rep.test_cases;
        for (int j = 0; j < m; ++j) {
            base_errs[static_cast<std::size_t>(j)].push_back(
                r.base_q[static_cast<std::size_t>(j)]);
            sanitized_count[static_cast<std::size_t>(j)] +=
                r.est.sanitized[static_cast<std::size_t>(j)] ? 1 : 0;
        }
        hskew.push_back(r.hyb_skew_q);
        hgee.push_back(r.hyb_gee_q);
        hypo.push_back(r.hypo_q);
        if (model) {
            ada.push_back(r.adandv_q);
            rep.timings.adandv_infer_s += r.infer_s;
            over_sels.push_back(r.over_sel);
            under_sels.push_back(r.under_sel);
            over_ys.push_back(r.over_y);
            under_ys.push_back(r.under_y);
            for (int j : r.over_sel) {
                ++rep.over_selected[static_cast<std::size_t>(j)];
            }
            for (int j : r.under_sel) {
                ++rep.under_selected[static_cast<std::size_t>(j)];
            }
            // Composition of the selected 2k estimates relative to the
            // truth: does the set bracket D, or does one side dominate?
            if (r.sel_any_over && r.sel_any_under) {
                ++rep.comp_both;
            } else if (r.sel_any_over) {
                ++rep.comp_only_over;
            } else {
                ++rep.comp_only_under;
            }
        }
    }
    if (rep.test_cases == 0) {
        throw data_error("run_benchmark: every test column failed");
    }

    rep.sanitized_rate.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        rep.sanitized_rate[static_cast<std::size_t>(j)] =
            static_cast<double>(sanitized_count[static_cast<std::size_t>(j)]) /
            static_cast<double>(rep.test_cases);
    }

    if (opt.baselines) {
        for (int j = 0; j < m; ++j) {
            rep.methods.push_back(
                {std::string(estimator_name(static_cast<EstimatorId>(j))),
                 aggregate(base_errs[static_cast<std::size_t>(j)])});
        }
        rep.methods.push_back({"hyb_skew", aggregate(hskew)});
        rep.methods.push_back({"hyb_gee", aggregate(hgee)});
        rep.methods.push_back({"hypo_optimal", aggregate(hypo)});

        if (!data.train.empty()) {
            // LE trains on the same training split as the learned model.
            std::vector<TrainSample> le_train;
            le_train.reserve(data.train.size());
            TrainConfig sample_cfg = opt.le_cfg;
            const double tle0 = now_seconds();
            for (const auto& col : data.train) {
                try {
                    le_train.push_back(
                        make_sample(col.profile, col.D, sample_cfg));
                } catch (const std::exception& e) {
                    rep.failed_columns.push_back(col.provenance + ": " +
                                                 e.what());
                }
            }
            if (!le_train.empty()) {
                const LeModel le = train_le(le_train, opt.le_cfg);
                rep.timings.le_train_s = now_seconds() - tle0;
                const double tle1 = now_seconds();
                std::vector<double> le_errs;
                for (const CaseResult& r : results) {
                    if (!r.ok) continue;
                    const std::size_t ci =
                        static_cast<std::size_t>(&r - results.data());
                    const double D =
                        static_cast<double>(data.test[ci].D);
                    const double est = le_estimate(
                        le, std::span<const double>(r.est.values),
                        static_cast<double>(data.test[ci].profile.N));
                    le_errs.push_back(q_error(est, D));
                }
                rep.methods.push_back({"le", aggregate(le_errs)});
                rep.timings.le_infer_s = now_seconds() - tle1;
            }
        }
    }

    if (model) {
        rep.has_model = true;
        rep.methods.push_back({"adandv", aggregate(ada)});
        rep.p_over_1 = precision_at_k(over_sels, over_ys, 1);
        rep.p_over_2 = precision_at_k(over_sels, over_ys, 2);
        rep.p_under_1 = precision_at_k(under_sels, under_ys, 1);
        rep.p_under_2 = precision_at_k(under_sels, under_ys, 2);
    }
    return rep;
}

}  // namespace ndv
