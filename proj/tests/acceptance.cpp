// Acceptance harness: one self-contained check per release criterion,
// printed as a [PASS]/[FAIL] line. Exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ndv/datagen.hpp"
#include "ndv/estimators.hpp"
#include "ndv/evaluation.hpp"
#include "ndv/fusion.hpp"
#include "ndv/neural.hpp"
#include "ndv/parallel.hpp"
#include "ndv/profile.hpp"
#include "ndv/rng.hpp"
#include "ndv/selection.hpp"

using namespace ndv;
namespace fs = std::filesystem;

namespace {

double now_s() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

bool report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", id, name,
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    return pass;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------------- 1

bool criterion_exactness() {
    const double t0 = now_s();
    const FrequencyProfile toy{{1, 1, 2}, 4, 9, 900, 0.01};
    std::ostringstream why;
    bool ok = true;
    const auto expect = [&](const char* what, double got, double want,
                            double tol) {
        if (!(std::abs(got - want) <= tol)) {
            ok = false;
            why << what << "=" << got << " (want " << want << "±" << tol
                << ") ";
        }
    };
    expect("gee", estimate_one(EstimatorId::GEE, toy).value, 13.0, 1e-9);
    expect("eb", estimate_one(EstimatorId::EB, toy).value, 13.0, 1e-9);
    expect("chao", estimate_one(EstimatorId::Chao, toy).value, 4.5, 1e-12);
    expect("jackknife", estimate_one(EstimatorId::Jackknife, toy).value,
           4.888888888888889, 1e-6);
    expect("bootstrap", estimate_one(EstimatorId::Bootstrap, toy).value,
           4.5026237190, 1e-3);
    expect("shlosser", estimate_one(EstimatorId::Shlosser, toy).value,
           48.1358147304, 0.01);
    expect("chao_lee", estimate_one(EstimatorId::ChaoLee, toy).value, 4.5,
           1e-6);
    const Estimate sichel = estimate_one(EstimatorId::Sichel, toy);
    if (!(sichel.value == 4.0 && sichel.sanitized)) {
        ok = false;
        why << "sichel=" << sichel.value << " flagged=" << sichel.sanitized
            << " (want flagged fallback 4) ";
    }
    expect("u", skew_u(toy).u, 1.2222222222, 1e-3);
    const double dt = now_s() - t0;
    if (dt >= 1.0) {
        ok = false;
        why << "runtime " << fmt(dt) << "s >= 1s";
    }
    return report(1, "estimator exactness on the reference profile", ok,
                  ok ? fmt(dt, 3) + "s" : why.str());
}

// ---------------------------------------------------------------------- 2

bool criterion_full_sample() {
    const double t0 = now_s();
    Rng rng = make_rng(99, 0);
    int bad = 0;
    std::string first;
    for (int c = 0; c < 200; ++c) {
        GeneratorSpec sp;
        sp.kind = c % 3 == 0   ? GeneratorSpec::Kind::Zipf
                  : c % 3 == 1 ? GeneratorSpec::Kind::Uniform
                               : GeneratorSpec::Kind::Geometric;
        sp.N = 1 + static_cast<std::int64_t>(uniform_below(rng, 10000));
        sp.V = 1 + static_cast<std::int64_t>(uniform_below(rng, 2000));
        sp.s = 1.1 + uniform01(rng);
        sp.seed = 5000 + static_cast<std::uint64_t>(c);
        const LabeledColumn col = label_column(sp, 1.0);
        const EstimateSet es = estimate_all(col.profile);
        const double want = static_cast<double>(col.D);
        if (col.profile.d != col.D) {
            ++bad;
            continue;
        }
        for (int j = 0; j < kNumEstimators; ++j) {
            if (es.values[static_cast<std::size_t>(j)] != want) {
                ++bad;
                if (first.empty()) {
                    first = std::string(estimator_name(
                               static_cast<EstimatorId>(j))) +
                            " on column " + std::to_string(c);
                }
                break;
            }
        }
    }
    const double dt = now_s() - t0;
    const bool ok = bad == 0 && dt < 30.0;
    return report(2, "full-sample consistency (rate 1.0 returns D exactly)",
                  ok,
                  ok ? "200 columns, " + fmt(dt, 2) + "s"
                     : std::to_string(bad) + " columns off (first: " + first +
                           "), " + fmt(dt, 2) + "s");
}

// ---------------------------------------------------------------------- 3

std::vector<int> oracle_labels(const std::vector<double>& est, double D,
                               bool over_class) {
    const int m = static_cast<int>(est.size());
    std::vector<int> members;
    for (int i = 0; i < m; ++i) {
        const bool over = est[static_cast<std::size_t>(i)] > D;
        if (over == over_class) members.push_back(i);
    }
    std::sort(members.begin(), members.end(), [&](int a, int b) {
        const double qa = std::max(est[static_cast<std::size_t>(a)] / D,
                                   D / est[static_cast<std::size_t>(a)]);
        const double qb = std::max(est[static_cast<std::size_t>(b)] / D,
                                   D / est[static_cast<std::size_t>(b)]);
        if (qa != qb) return qa < qb;
        return a < b;
    });
    std::vector<int> y(static_cast<std::size_t>(m), 0);
    int score = m;
    for (int idx : members) y[static_cast<std::size_t>(idx)] = score--;
    return y;
}

bool criterion_label_oracle() {
    const double t0 = now_s();
    Rng rng = make_rng(4242, 0);
    int mismatches = 0;
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> est(kNumEstimators);
        for (double& e : est) e = std::exp(uniform01(rng) * 14.0);
        if (t % 3 == 0) {
            // Force ties, including cross-class candidates.
            est[static_cast<std::size_t>(t % 14)] =
                est[static_cast<std::size_t>((t + 5) % 14)];
        }
        double D = std::exp(uniform01(rng) * 14.0);
        if (t % 11 == 0) D = 0.5;             // everything overestimates
        if (t % 13 == 0) D = std::exp(15.0);  // everything underestimates
        if (t % 17 == 0) D = est[5];          // exact hit

        if (over_labels(est, D) != oracle_labels(est, D, true) ||
            under_labels(est, D) != oracle_labels(est, D, false)) {
            ++mismatches;
        }
    }
    const double dt = now_s() - t0;
    const bool ok = mismatches == 0 && dt < 10.0;
    return report(3, "ranking-label construction matches brute-force oracle",
                  ok,
                  ok ? "10000 instances, " + fmt(dt, 2) + "s"
                     : std::to_string(mismatches) + " mismatches, " +
                           fmt(dt, 2) + "s");
}

// ---------------------------------------------------------------------- 4

std::vector<double> flatten_grads(const MlpModel& shape, const MlpGrads& g) {
    MlpModel tmp = shape;
    tmp.W = g.W;
    tmp.b = g.b;
    return flatten(tmp);
}

bool criterion_gradients() {
    const double t0 = now_s();
    TrainConfig cfg;  // production defaults, H=100
    int checked = 0, skipped = 0;
    double worst = 0.0;

    Rng rng = make_rng(808, 0);
    for (int b = 0; b < 20; ++b) {
        // Random batches with bounded magnitudes: every loss term stays
        // small enough that central differences resolve even the weight-
        // decay component of the gradient (a wild selected estimate, e.g.
        // an overflowing baseline, inflates the fusion loss by orders of
        // magnitude and buries small gradients below its rounding
        // granularity).
        std::vector<TrainSample> batch;
        for (int j = 0; j < 8; ++j) {
            TrainSample s;
            s.D = std::exp(1.0 + 10.0 * uniform01(rng));
            s.N = 1e18;
            s.x.resize(static_cast<std::size_t>(cfg.H));
            for (double& v : s.x) v = 2.0 * uniform01(rng) - 1.0;
            s.estimates.resize(kNumEstimators);
            for (double& e : s.estimates) {
                e = s.D * std::exp(4.0 * uniform01(rng) - 2.0);
            }
            s.sanitized.assign(kNumEstimators, 0);
            batch.push_back(std::move(s));
        }
        TrainConfig mcfg = cfg;
        mcfg.seed = 31 + static_cast<std::uint64_t>(b);
        const AdaNdvModel model = make_model(mcfg, kNumEstimators);

        MlpGrads g_over, g_under, g_weight;
        batch_gradients(model, batch, g_over, g_under, g_weight);
        const std::vector<std::vector<double>> analytic = {
            flatten_grads(model.over_ranker, g_over),
            flatten_grads(model.under_ranker, g_under),
            flatten_grads(model.weighter, g_weight),
        };

        for (int net = 0; net < 3; ++net) {
            const MlpModel& base = net == 0   ? model.over_ranker
                                   : net == 1 ? model.under_ranker
                                              : model.weighter;
            const std::size_t P = param_count(base);
            std::set<std::size_t> idxs;
            for (std::size_t j = 0; j < 12; ++j) {
                idxs.insert((j * 7919 + 101 + static_cast<std::size_t>(b)) % P);
            }
            const std::vector<double> theta = flatten(base);
            // Each network is probed against the loss term that drives it:
            // its own ranking loss for the rankers, the fusion loss for the
            // weighter (whose analytic gradient carries the joint
            // objective's beta factor). Probing the joint total instead
            // would bury the small weighter term below the rounding
            // granularity of the much larger ranking sums.
            const auto loss_at = [&](std::size_t i, double delta) {
                AdaNdvModel m = model;
                MlpModel& target = net == 0   ? m.over_ranker
                                   : net == 1 ? m.under_ranker
                                              : m.weighter;
                std::vector<double> t = theta;
                t[i] += delta;
                unflatten(target, t);
                const LossComponents lc = batch_loss(m, batch);
                return net == 0 ? lc.over : net == 1 ? lc.under : lc.est;
            };
            const double fd_scale = net == 2 ? cfg.beta : 1.0;
            // The weighter needs a larger step: its smallest real gradient
            // components come from the weight-decay term (~1e-7) and would
            // otherwise drown in rounding noise.
            const double h0 = net == 2 ? 1e-4 : 1e-5;
            for (std::size_t i : idxs) {
                const double h = h0 * std::max(1.0, std::abs(theta[i]));
                const double g1 = (loss_at(i, h) - loss_at(i, -h)) / (2.0 * h);
                const double g2 =
                    (loss_at(i, 0.5 * h) - loss_at(i, -0.5 * h)) / h;
                // Disagreement between step sizes marks a ReLU/top-k flip
                // inside the probe window: a legitimately non-smooth point.
                if (std::abs(g1 - g2) > 1e-4 * std::max(1.0, std::abs(g1))) {
                    ++skipped;
                    continue;
                }
                const double gfd = fd_scale * g2;
                const double ga = analytic[static_cast<std::size_t>(net)][i];
                const double denom =
                    std::max({1e-6, std::abs(gfd), std::abs(ga)});
                worst = std::max(worst, std::abs(gfd - ga) / denom);
                ++checked;
            }
        }
    }
    const double dt = now_s() - t0;
    const bool enough = checked >= (checked + skipped) * 4 / 5;
    const bool ok = worst < 1e-4 && enough && checked > 0 && dt < 60.0;
    std::ostringstream det;
    det << "max rel err " << worst << " over " << checked
        << " sampled parameters (" << skipped << " non-smooth skipped), "
        << fmt(dt, 2) << "s";
    return report(4, "analytic gradients match central finite differences", ok,
                  det.str());
}

// ---------------------------------------------------------------------- 5

bool criterion_bracketing() {
    const double t0 = now_s();
    TrainConfig cfg;
    cfg.H = 8;
    cfg.k = 2;
    cfg.seed = 5;
    const AdaNdvModel model = make_model(cfg, kNumEstimators);

    Rng rng = make_rng(555, 0);
    int done = 0, attempts = 0, bracket_bad = 0, solve_bad = 0;
    while (done < 1000 && attempts < 50000) {
        ++attempts;
        const double D = std::exp(1.0 + 10.0 * uniform01(rng));
        TrainSample s;
        s.x.resize(8);
        for (double& v : s.x) v = 2.0 * uniform01(rng) - 1.0;
        s.estimates.resize(kNumEstimators);
        for (double& e : s.estimates) {
            e = D * std::exp(2.0 * uniform01(rng) - 1.0);
        }
        s.sanitized.assign(kNumEstimators, 0);
        s.D = D;
        s.N = 1e18;

        const InferResult r = infer_sample(model, s);
        std::vector<double> t;  // selected log-estimates, fusion order
        for (int i : r.over_idx) {
            t.push_back(std::log(s.estimates[static_cast<std::size_t>(i)]));
        }
        for (int i : r.under_idx) {
            t.push_back(std::log(s.estimates[static_cast<std::size_t>(i)]));
        }
        const auto [lo_it, hi_it] = std::minmax_element(t.begin(), t.end());
        const double lo = std::exp(*lo_it), hi = std::exp(*hi_it);
        if (!(lo < D && D < hi)) continue;  // need both sides of the truth
        ++done;

        // Convexity of the log-space weights keeps the fusion in the hull.
        if (!(r.raw >= lo * (1 - 1e-9) && r.raw <= hi * (1 + 1e-9))) {
            ++bracket_bad;
        }

        // Directly solved weights on the extreme pair hit D exactly.
        const double a = (std::log(D) - *lo_it) / (*hi_it - *lo_it);
        std::vector<double> w(t.size(), 0.0);
        w[static_cast<std::size_t>(hi_it - t.begin())] = a;
        w[static_cast<std::size_t>(lo_it - t.begin())] += 1.0 - a;
        const double fused = fuse_with_weights(w, t);
        if (!(std::max(fused / D, D / fused) <= 1.0 + 1e-9)) ++solve_bad;
    }
    const double dt = now_s() - t0;
    const bool ok = done == 1000 && bracket_bad == 0 && solve_bad == 0;
    std::ostringstream det;
    det << done << " qualifying cases (" << attempts << " draws), "
        << bracket_bad << " outside hull, " << solve_bad
        << " direct solves off, " << fmt(dt, 2) << "s";
    return report(5, "fused value is bracketed and exactly solvable", ok,
                  det.str());
}

// ------------------------------------------------------------------ 6/7/8/9

struct Experiment {
    Dataset data;
    FitResult fit;
    BenchmarkReport rep;
    std::size_t skipped_samples = 0;
    double seconds = 0.0;
};

std::vector<GeneratorSpec> experiment_specs() {
    std::vector<GeneratorSpec> specs;
    specs.reserve(2000);
    for (int i = 0; i < 2000; ++i) {
        GeneratorSpec sp;
        switch (i % 4) {
            case 0: sp.kind = GeneratorSpec::Kind::Zipf; sp.s = 1.2; break;
            case 1: sp.kind = GeneratorSpec::Kind::Zipf; sp.s = 1.5; break;
            case 2: sp.kind = GeneratorSpec::Kind::Zipf; sp.s = 2.0; break;
            default: sp.kind = GeneratorSpec::Kind::Uniform; break;
        }
        Rng rng = make_rng(777, static_cast<std::uint64_t>(i));
        const double ln_n = std::log(1e4) + uniform01(rng) * std::log(100.0);
        sp.N = std::llround(std::exp(ln_n));
        sp.N = std::clamp<std::int64_t>(sp.N, 10000, 1000000);
        // Domain-to-row ratio varies over three decades so that per-column
        // estimator biases differ in sign and magnitude; a corpus with one
        // fixed ratio is nearly degenerate for the rankers.
        const double ln_r =
            std::log(1.0 / 1000.0) + uniform01(rng) * std::log(500.0);
        sp.V = std::max<std::int64_t>(
            1, std::llround(static_cast<double>(sp.N) * std::exp(ln_r)));
        sp.seed = 1000 + static_cast<std::uint64_t>(i);
        specs.push_back(sp);
    }
    return specs;
}

Experiment run_experiment(int threads) {
    Experiment e;
    const double t0 = now_s();
    const std::vector<GeneratorSpec> specs = experiment_specs();
    e.data = make_dataset(specs, 0.01, 42, threads);

    TrainConfig cfg;  // production defaults: a=1 b=0.5 k=2 H=100 lr=1e-3
    const auto to_samples = [&](const std::vector<LabeledColumn>& cols) {
        std::vector<TrainSample> out;
        out.reserve(cols.size());
        for (const auto& c : cols) {
            try {
                out.push_back(
                    make_sample(c.profile, static_cast<double>(c.D), cfg));
            } catch (const std::exception&) {
                ++e.skipped_samples;
            }
        }
        return out;
    };
    const std::vector<TrainSample> tr = to_samples(e.data.train);
    const std::vector<TrainSample> va = to_samples(e.data.validation);
    e.fit = train(tr, va, cfg, threads);

    BenchmarkOptions opt;
    opt.threads = threads;
    opt.adandv_train_seconds = e.fit.train_seconds;
    e.rep = run_benchmark(e.data, &e.fit.model, opt);
    e.seconds = now_s() - t0;
    return e;
}

const QErrorStats* method_stats(const BenchmarkReport& rep,
                                const std::string& name) {
    for (const auto& m : rep.methods) {
        if (m.name == name) return &m.stats;
    }
    return nullptr;
}

bool criterion_end_to_end(const Experiment& e) {
    std::ostringstream why;
    bool ok = true;
    const QErrorStats* ada = method_stats(e.rep, "adandv");
    const QErrorStats* le = method_stats(e.rep, "le");
    const QErrorStats* hypo = method_stats(e.rep, "hypo_optimal");
    if (!ada || !le || !hypo) {
        return report(6, "end-to-end training quality", false,
                      "missing method rows");
    }
    double best_base = 1e300;
    std::string best_name;
    for (int j = 0; j < kNumEstimators; ++j) {
        const std::string name(estimator_name(static_cast<EstimatorId>(j)));
        const QErrorStats* s = method_stats(e.rep, name);
        if (!s) {
            ok = false;
            why << "missing " << name << " ";
            continue;
        }
        if (s->mean < best_base) {
            best_base = s->mean;
            best_name = name;
        }
        if (!(ada->mean < s->mean)) {
            ok = false;
            why << "adandv " << fmt(ada->mean) << " !< " << name << " "
                << fmt(s->mean) << " ";
        }
    }
    if (!(ada->mean < le->mean)) {
        ok = false;
        why << "adandv " << fmt(ada->mean) << " !< le " << fmt(le->mean)
            << " ";
    }
    if (!(hypo->mean <= ada->mean)) {
        ok = false;
        why << "hypo " << fmt(hypo->mean) << " !<= adandv " << fmt(ada->mean)
            << " ";
    }
    const double floor3x = 3.0 / 14.0;
    if (!(e.rep.p_over_1.precision >= floor3x)) {
        ok = false;
        why << "P@1 over " << fmt(e.rep.p_over_1.precision) << " < "
            << fmt(floor3x) << " ";
    }
    if (!(e.rep.p_under_1.precision >= floor3x)) {
        ok = false;
        why << "P@1 under " << fmt(e.rep.p_under_1.precision) << " < "
            << fmt(floor3x) << " ";
    }
    if (e.skipped_samples != 0) {
        ok = false;
        why << e.skipped_samples << " columns failed featurization ";
    }
    if (!(e.seconds <= 900.0)) {
        ok = false;
        why << "runtime " << fmt(e.seconds, 1) << "s > 900s ";
    }
    std::ostringstream det;
    det << "adandv mean " << fmt(ada->mean) << " vs best base " << best_name
        << " " << fmt(best_base) << ", le " << fmt(le->mean) << ", hypo "
        << fmt(hypo->mean) << "; P@1 over/under "
        << fmt(e.rep.p_over_1.precision) << "/"
        << fmt(e.rep.p_under_1.precision) << "; " << fmt(e.seconds, 1) << "s";
    return report(6, "end-to-end training quality", ok,
                  ok ? det.str() : why.str() + "| " + det.str());
}

bool criterion_composition(const Experiment& e) {
    const double frac = e.rep.test_cases == 0
                            ? 0.0
                            : static_cast<double>(e.rep.comp_both) /
                                  static_cast<double>(e.rep.test_cases);
    const bool ok = frac > 0.5;
    return report(7, "selected sets mix over- and under-estimates", ok,
                  fmt(100.0 * frac, 1) + "% of " +
                      std::to_string(e.rep.test_cases) + " test columns");
}

bool criterion_latency(const Experiment& e) {
    GeneratorSpec sp;
    sp.kind = GeneratorSpec::Kind::Uniform;
    sp.N = 1000000;
    sp.V = 100000;
    sp.seed = 424242;
    const LabeledColumn col = label_column(sp, 0.01);
    if (col.profile.n != 10000) {
        return report(8, "inference latency", false,
                      "setup: sample size " + std::to_string(col.profile.n));
    }
    volatile double sink = 0.0;
    sink = sink + infer(e.fit.model, col.profile).value;  // warm-up
    const int reps = 100;
    const double t0 = now_s();
    for (int i = 0; i < reps; ++i) {
        sink = sink + infer(e.fit.model, col.profile).value;
    }
    const double ms = (now_s() - t0) / reps * 1e3;
    (void)sink;
    const bool ok = ms <= 10.0;
    return report(8, "inference latency at n=10000", ok,
                  fmt(ms, 3) + " ms per column (limit 10)");
}

bool criterion_determinism(const Experiment& e1, int threads) {
    const Experiment e2 = run_experiment(threads);
    const fs::path a = fs::temp_directory_path() / "ndv_acceptance_a.ckpt";
    const fs::path b = fs::temp_directory_path() / "ndv_acceptance_b.ckpt";
    save_checkpoint(a.string(), e1.fit.model);
    save_checkpoint(b.string(), e2.fit.model);
    const auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        return os.str();
    };
    const bool ckpt_same = slurp(a) == slurp(b);
    const bool report_same = e1.rep.to_json() == e2.rep.to_json();
    fs::remove(a);
    fs::remove(b);
    const bool ok = ckpt_same && report_same;
    std::ostringstream det;
    det << "checkpoint " << (ckpt_same ? "identical" : "DIFFERS")
        << ", report " << (report_same ? "identical" : "DIFFERS") << ", rerun "
        << fmt(e2.seconds, 1) << "s";
    return report(9, "training and evaluation are reproducible", ok,
                  det.str());
}

}  // namespace

int main() {
    const int threads = hardware_threads();
    std::printf("acceptance run (threads=%d)\n", threads);
    int failures = 0;

    failures += criterion_exactness() ? 0 : 1;
    failures += criterion_full_sample() ? 0 : 1;
    failures += criterion_label_oracle() ? 0 : 1;
    failures += criterion_gradients() ? 0 : 1;
    failures += criterion_bracketing() ? 0 : 1;

    const Experiment e1 = run_experiment(threads);
    failures += criterion_end_to_end(e1) ? 0 : 1;
    failures += criterion_composition(e1) ? 0 : 1;
    failures += criterion_latency(e1) ? 0 : 1;
    failures += criterion_determinism(e1, threads) ? 0 : 1;

    std::printf("%d failure(s)\n", failures);
    return failures;
}
