#include "ndv/fusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ndv/errors.hpp"
#include "ndv/numerics.hpp"
#include "ndv/parallel.hpp"
#include "ndv/selection.hpp"

namespace ndv {

namespace {

constexpr int kHidden1 = 128;
constexpr int kHidden2 = 64;

}  // namespace

AdaNdvModel make_model(const TrainConfig& cfg, int m) {
    if (m < 1) throw std::domain_error("make_model: m must be >= 1");
    if (cfg.k < 1 || cfg.k > m) {
        throw std::domain_error("make_model: need 1 <= k <= m");
    }
    if (cfg.H < 4) throw std::domain_error("make_model: H must be >= 4");
    AdaNdvModel model;
    model.config = cfg;
    model.m = m;
    Rng r_over = make_rng(cfg.seed, 1);
    Rng r_under = make_rng(cfg.seed, 2);
    Rng r_weight = make_rng(cfg.seed, 3);
    model.over_ranker = make_mlp({cfg.H, kHidden1, kHidden2, m}, r_over);
    model.under_ranker = make_mlp({cfg.H, kHidden1, kHidden2, m}, r_under);
    model.weighter =
        make_mlp({cfg.H + 2 * cfg.k, kHidden1, kHidden2, 2 * cfg.k}, r_weight);
    return model;
}

TrainSample make_sample(const FrequencyProfile& p, double D,
                        const TrainConfig& cfg) {
    TrainSample s;
    s.x = featurize(p, cfg.H, cfg.feature_rescale);
    EstimateSet set = estimate_all(p);
    s.estimates = std::move(set.values);
    s.sanitized = std::move(set.sanitized);
    s.D = D;
    s.N = static_cast<double>(p.N);
    return s;
}

std::vector<double> fusion_features(std::span<const double> x,
                                    std::span<const double> estimates,
                                    std::span<const int> over_idx,
                                    std::span<const int> under_idx) {
    std::vector<double> xp(x.begin(), x.end());
    xp.reserve(x.size() + over_idx.size() + under_idx.size());
    for (int i : over_idx) {
        xp.push_back(std::log(estimates[static_cast<std::size_t>(i)]));
    }
    for (int i : under_idx) {
        xp.push_back(std::log(estimates[static_cast<std::size_t>(i)]));
    }
    return xp;
}

double fuse_with_weights(std::span<const double> lambda,
                         std::span<const double> log_estimates) {
    if (lambda.size() != log_estimates.size() || lambda.empty()) {
        throw std::domain_error("fuse_with_weights: size mismatch");
    }
    double ln_dhat = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        ln_dhat += lambda[i] * log_estimates[i];
    }
    return std::exp(ln_dhat);
}

double est_loss(std::span<const double> ln_dhat, std::span<const double> ln_d,
                const MlpModel& weighter, double lambda) {
    if (ln_dhat.size() != ln_d.size() || ln_dhat.empty()) {
        throw std::domain_error("est_loss: size mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < ln_dhat.size(); ++i) {
        const double e = ln_dhat[i] - ln_d[i];
        acc += e * e;
    }
    return acc / static_cast<double>(ln_dhat.size()) +
           lambda * param_l2_norm(weighter);
}

double total_loss(double l_over, double l_under, double l_est, double beta) {
    return l_over + l_under + beta * l_est;
}

namespace {

// Per-sample forward state shared by loss and gradient paths.
struct SampleForward {
    MlpActivations act_over, act_under, act_weight;
    std::vector<int> sel_over, sel_under;
    std::vector<double> t;       // 2k selected log-estimates
    std::vector<double> lambda;  // softmax of weighter output
    double ln_dhat = 0.0;
    RankLossResult rl_over, rl_under;
};

SampleForward forward_sample(const AdaNdvModel& model, const TrainSample& s) {
    const TrainConfig& cfg = model.config;
    SampleForward f;
    f.act_over = mlp_forward_cached(model.over_ranker, s.x);
    f.act_under = mlp_forward_cached(model.under_ranker, s.x);
    const std::vector<double>& s_over = f.act_over.a.back();
    const std::vector<double>& s_under = f.act_under.a.back();

    const std::vector<int> y_over = over_labels(s.estimates, s.D);
    const std::vector<int> y_under = under_labels(s.estimates, s.D);
    f.rl_over = rank_loss(s_over, y_over, cfg.alpha);
    f.rl_under = rank_loss(s_under, y_under, cfg.alpha);

    f.sel_over = select_top_k(s_over, cfg.k);
    f.sel_under = select_top_k(s_under, cfg.k);
    const std::vector<double> xp =
        fusion_features(s.x, s.estimates, f.sel_over, f.sel_under);
    f.act_weight = mlp_forward_cached(model.weighter, xp);
    f.lambda = softmax(f.act_weight.a.back());

    f.t.reserve(f.lambda.size());
    for (int i : f.sel_over) {
        f.t.push_back(std::log(s.estimates[static_cast<std::size_t>(i)]));
    }
    for (int i : f.sel_under) {
        f.t.push_back(std::log(s.estimates[static_cast<std::size_t>(i)]));
    }
    f.ln_dhat = 0.0;
    for (std::size_t j = 0; j < f.t.size(); ++j) {
        f.ln_dhat += f.lambda[j] * f.t[j];
    }
    return f;
}

}  // namespace

LossComponents batch_gradients(const AdaNdvModel& model,
                               std::span<const TrainSample> batch,
                               MlpGrads& g_over, MlpGrads& g_under,
                               MlpGrads& g_weighter) {
    if (batch.empty()) throw std::domain_error("batch_gradients: empty batch");
    const TrainConfig& cfg = model.config;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    g_over.init_like(model.over_ranker);
    g_under.init_like(model.under_ranker);
    g_weighter.init_like(model.weighter);

    LossComponents out;
    double est_sq = 0.0;
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const TrainSample& s = batch[bi];
        SampleForward f = forward_sample(model, s);
        const double e = f.ln_dhat - std::log(s.D);
        if (!std::isfinite(f.rl_over.loss) || !std::isfinite(f.rl_under.loss) ||
            !std::isfinite(e)) {
            std::ostringstream msg;
            msg << "non-finite loss at batch sample " << bi
                << " (over=" << f.rl_over.loss << ", under=" << f.rl_under.loss
                << ", log-gap=" << e << ")";
            throw std::runtime_error(msg.str());
        }
        out.over += f.rl_over.loss * inv_b;
        out.under += f.rl_under.loss * inv_b;
        est_sq += e * e * inv_b;

        // Ranker gradients: only the ranking losses flow back (selection is
        // hard and blocks the fusion gradient).
        std::vector<double> up_over = f.rl_over.grad;
        for (double& v : up_over) v *= inv_b;
        mlp_backward(model.over_ranker, f.act_over, up_over, g_over);
        std::vector<double> up_under = f.rl_under.grad;
        for (double& v : up_under) v *= inv_b;
        mlp_backward(model.under_ranker, f.act_under, up_under, g_under);

        // Weighter: d mean-sq / dz_a = (2e/B) * lambda_a * (t_a - ln_dhat).
        std::vector<double> up_w(f.lambda.size());
        for (std::size_t a = 0; a < f.lambda.size(); ++a) {
            up_w[a] = 2.0 * e * inv_b * f.lambda[a] * (f.t[a] - f.ln_dhat);
        }
        mlp_backward(model.weighter, f.act_weight, up_w, g_weighter);
    }

    // L2 penalty: lambda * ||W||_2 over weighter parameters; gradient
    // lambda * w / ||W||. Then the whole est gradient is scaled by beta per
    // the joint objective.
    const double norm = param_l2_norm(model.weighter);
    out.est = est_sq + cfg.lambda * norm;
    if (norm > 0.0 && cfg.lambda != 0.0) {
        const double c = cfg.lambda / norm;
        for (std::size_t l = 0; l < model.weighter.W.size(); ++l) {
            for (std::size_t i = 0; i < model.weighter.W[l].size(); ++i) {
                g_weighter.W[l][i] += c * model.weighter.W[l][i];
            }
            for (std::size_t i = 0; i < model.weighter.b[l].size(); ++i) {
                g_weighter.b[l][i] += c * model.weighter.b[l][i];
            }
        }
    }
    g_weighter.scale(cfg.beta);
    out.total = total_loss(out.over, out.under, out.est, cfg.beta);
    return out;
}

LossComponents batch_loss(const AdaNdvModel& model,
                          std::span<const TrainSample> batch) {
    MlpGrads a, b, c;
    return batch_gradients(model, batch, a, b, c);
}

InferResult infer_sample(const AdaNdvModel& model, const TrainSample& s) {
    const TrainConfig& cfg = model.config;
    InferResult r;
    r.s_over = mlp_forward(model.over_ranker, s.x);
    r.s_under = mlp_forward(model.under_ranker, s.x);
    r.over_idx = select_top_k(r.s_over, cfg.k);
    r.under_idx = select_top_k(r.s_under, cfg.k);
    const std::vector<double> xp =
        fusion_features(s.x, s.estimates, r.over_idx, r.under_idx);
    const std::vector<double> z = mlp_forward(model.weighter, xp);
    r.lambda = softmax(z);
    std::vector<double> t;
    t.reserve(r.lambda.size());
    for (int i : r.over_idx) {
        t.push_back(std::log(s.estimates[static_cast<std::size_t>(i)]));
    }
    for (int i : r.under_idx) {
        t.push_back(std::log(s.estimates[static_cast<std::size_t>(i)]));
    }
    r.raw = fuse_with_weights(r.lambda, t);
    r.value = std::clamp(r.raw, 1.0, std::max(1.0, s.N));
    return r;
}

InferResult infer(const AdaNdvModel& model, const FrequencyProfile& p) {
    const TrainSample s = make_sample(p, 1.0, model.config);
    return infer_sample(model, s);
}

FitResult train(const std::vector<TrainSample>& train_set,
                const std::vector<TrainSample>& val_set,
                const TrainConfig& cfg, int threads,
                const AdaNdvModel* init) {
    if (train_set.empty() || val_set.empty()) {
        throw std::domain_error("train: train and validation sets must be nonempty");
    }
    if (cfg.epochs < 1) throw std::domain_error("train: epochs must be >= 1");
    if (cfg.batch_size < 1) {
        throw std::domain_error("train: batch_size must be >= 1");
    }
    const auto t0 = std::chrono::steady_clock::now();

    const int m = static_cast<int>(train_set.front().estimates.size());
    AdaNdvModel model = make_model(cfg, m);
    if (init) {
        if (init->m != m || init->config.H != cfg.H || init->config.k != cfg.k) {
            throw data_error("train: resume checkpoint has incompatible m/H/k");
        }
        model.over_ranker = init->over_ranker;
        model.under_ranker = init->under_ranker;
        model.weighter = init->weighter;
    }
    AdamState ad_over, ad_under, ad_weight;
    ad_over.init_like(model.over_ranker, cfg.lr);
    ad_under.init_like(model.under_ranker, cfg.lr);
    ad_weight.init_like(model.weighter, cfg.lr);

    FitResult result;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TrainSample> batch;
    bool have_best = false;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = make_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(
                uniform_below(shuffle_rng, static_cast<std::uint64_t>(i)));
            std::swap(order[i - 1], order[j]);
        }

        EpochLog log;
        log.epoch = epoch;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(
                order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(train_set[order[i]]);
            }
            MlpGrads g_over, g_under, g_weight;
            LossComponents c;
            try {
                c = batch_gradients(model, batch, g_over, g_under, g_weight);
            } catch (const std::runtime_error& e) {
                std::ostringstream msg;
                msg << "train: epoch " << epoch << ", batch at offset " << start
                    << ": " << e.what();
                throw std::runtime_error(msg.str());
            }
            adam_step(model.over_ranker, ad_over, g_over);
            adam_step(model.under_ranker, ad_under, g_under);
            adam_step(model.weighter, ad_weight, g_weight);
            const double w = static_cast<double>(batch.size());
            log.l_over += c.over * w;
            log.l_under += c.under * w;
            log.l_est += c.est * w;
            seen += batch.size();
        }
        log.l_over /= static_cast<double>(seen);
        log.l_under /= static_cast<double>(seen);
        log.l_est /= static_cast<double>(seen);

        // Validation pass (deterministic; parallel across columns).
        std::vector<double> qerr(val_set.size());
        parallel_for(static_cast<std::int64_t>(val_set.size()), threads,
                     [&](std::int64_t i) {
                         const TrainSample& s = val_set[static_cast<std::size_t>(i)];
                         const InferResult r = infer_sample(model, s);
                         qerr[static_cast<std::size_t>(i)] =
                             std::max(r.value / s.D, s.D / r.value);
                     });
        double mean = 0.0;
        for (double q : qerr) mean += q;
        log.val_mean_q = mean / static_cast<double>(qerr.size());
        log.val_q99 = quantile(qerr, 0.99);
        result.log.push_back(log);

        if (!have_best || log.val_q99 < result.model.best_val_q99) {
            result.model = model;
            result.model.best_epoch = epoch;
            result.model.best_val_q99 = log.val_q99;
            have_best = true;
        }
    }

    result.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O. Fixed little-endian layout, documented in the README.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'N', 'D', 'V', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, &v, 4); }
void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, &v, 8); }
void put_f64(std::ostream& os, double v) { put_bytes(os, &v, 8); }
void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

void get_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw data_error("checkpoint: truncated file");
    }
}
std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v;
    get_bytes(is, &v, 4);
    return v;
}
std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v;
    get_bytes(is, &v, 8);
    return v;
}
double get_f64(std::istream& is) {
    double v;
    get_bytes(is, &v, 8);
    return v;
}
std::uint8_t get_u8(std::istream& is) {
    std::uint8_t v;
    get_bytes(is, &v, 1);
    return v;
}

void put_mlp(std::ostream& os, const MlpModel& m) {
    put_u32(os, static_cast<std::uint32_t>(m.dims.size()));
    for (int d : m.dims) put_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        put_bytes(os, m.W[l].data(), m.W[l].size() * sizeof(double));
        put_bytes(os, m.b[l].data(), m.b[l].size() * sizeof(double));
    }
}

MlpModel get_mlp(std::istream& is) {
    const std::uint32_t ndims = get_u32(is);
    if (ndims < 2 || ndims > 64) {
        throw data_error("checkpoint: implausible layer count");
    }
    MlpModel m;
    m.dims.resize(ndims);
    for (auto& d : m.dims) {
        d = static_cast<int>(get_u32(is));
        if (d < 1 || d > 1 << 20) {
            throw data_error("checkpoint: implausible layer dimension");
        }
    }
    m.W.resize(ndims - 1);
    m.b.resize(ndims - 1);
    for (std::size_t l = 0; l + 1 < ndims; ++l) {
        m.W[l].resize(static_cast<std::size_t>(m.dims[l]) *
                      static_cast<std::size_t>(m.dims[l + 1]));
        m.b[l].resize(static_cast<std::size_t>(m.dims[l + 1]));
        get_bytes(is, m.W[l].data(), m.W[l].size() * sizeof(double));
        get_bytes(is, m.b[l].data(), m.b[l].size() * sizeof(double));
    }
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const AdaNdvModel& model) {
    if (model.m != kNumEstimators) {
        throw data_error("checkpoint: only the canonical estimator set (m=14) "
                         "is a deployable artifact");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("checkpoint: cannot open for writing: " + path);
    put_bytes(os, kMagic, sizeof(kMagic));
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(model.m));
    put_u32(os, static_cast<std::uint32_t>(model.config.H));
    put_u32(os, static_cast<std::uint32_t>(model.config.k));
    put_u32(os, static_cast<std::uint32_t>(model.config.epochs));
    put_u32(os, static_cast<std::uint32_t>(model.config.batch_size));
    put_f64(os, model.config.alpha);
    put_f64(os, model.config.beta);
    put_f64(os, model.config.lr);
    put_f64(os, model.config.lambda);
    put_u64(os, model.config.seed);
    put_u8(os, model.config.feature_rescale ? 1 : 0);
    put_u32(os, static_cast<std::uint32_t>(model.best_epoch));
    put_f64(os, model.best_val_q99);
    for (int i = 0; i < model.m; ++i) {
        const std::string_view name = estimator_name(static_cast<EstimatorId>(i));
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        put_bytes(os, name.data(), name.size());
    }
    put_mlp(os, model.over_ranker);
    put_mlp(os, model.under_ranker);
    put_mlp(os, model.weighter);
    if (!os) throw data_error("checkpoint: write failed: " + path);
}

AdaNdvModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("checkpoint: cannot open: " + path);
    char magic[8];
    get_bytes(is, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw data_error("checkpoint: bad magic (not an ndv checkpoint)");
    }
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw data_error("checkpoint: unsupported format version " +
                         std::to_string(version));
    }
    AdaNdvModel model;
    model.m = static_cast<int>(get_u32(is));
    if (model.m != kNumEstimators) {
        throw data_error("checkpoint: incompatible estimator count m=" +
                         std::to_string(model.m) + " (this build expects " +
                         std::to_string(kNumEstimators) + ")");
    }
    model.config.H = static_cast<int>(get_u32(is));
    model.config.k = static_cast<int>(get_u32(is));
    model.config.epochs = static_cast<int>(get_u32(is));
    model.config.batch_size = static_cast<int>(get_u32(is));
    model.config.alpha = get_f64(is);
    model.config.beta = get_f64(is);
    model.config.lr = get_f64(is);
    model.config.lambda = get_f64(is);
    model.config.seed = get_u64(is);
    model.config.feature_rescale = get_u8(is) != 0;
    model.best_epoch = static_cast<int>(get_u32(is));
    model.best_val_q99 = get_f64(is);
    for (int i = 0; i < model.m; ++i) {
        const std::uint32_t len = get_u32(is);
        if (len > 64) throw data_error("checkpoint: implausible name length");
        std::string name(len, '\0');
        get_bytes(is, name.data(), len);
        if (name != estimator_name(static_cast<EstimatorId>(i))) {
            throw data_error("checkpoint: estimator order mismatch at index " +
                             std::to_string(i) + " (got '" + name + "')");
        }
    }
    model.over_ranker = get_mlp(is);
    model.under_ranker = get_mlp(is);
    model.weighter = get_mlp(is);
    const auto expect = [](bool ok, const char* what) {
        if (!ok) throw data_error(std::string("checkpoint: shape mismatch: ") + what);
    };
    expect(model.over_ranker.input_dim() == model.config.H, "over-ranker input");
    expect(model.over_ranker.output_dim() == model.m, "over-ranker output");
    expect(model.under_ranker.input_dim() == model.config.H, "under-ranker input");
    expect(model.under_ranker.output_dim() == model.m, "under-ranker output");
    expect(model.weighter.input_dim() == model.config.H + 2 * model.config.k,
           "weighter input");
    expect(model.weighter.output_dim() == 2 * model.config.k, "weighter output");
    return model;
}

}  // namespace ndv
