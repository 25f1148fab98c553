#include "ndv/neural.hpp"

#include <cmath>
#include <stdexcept>

namespace ndv {

MlpModel make_mlp(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw std::domain_error("make_mlp: need >= 2 dims");
    for (int d : dims) {
        if (d < 1) throw std::domain_error("make_mlp: dims must be positive");
    }
    MlpModel m;
    m.dims = dims;
    m.W.resize(dims.size() - 1);
    m.b.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        m.W[l].resize(static_cast<std::size_t>(fan_in) *
                      static_cast<std::size_t>(fan_out));
        for (double& w : m.W[l]) w = (2.0 * uniform01(rng) - 1.0) * bound;
        m.b[l].assign(static_cast<std::size_t>(fan_out), 0.0);
    }
    return m;
}

namespace {

void affine(const MlpModel& m, std::size_t l, std::span<const double> in,
            std::vector<double>& out) {
    const int rows = m.dims[l + 1];
    const int cols = m.dims[l];
    out.assign(static_cast<std::size_t>(rows), 0.0);
    const double* W = m.W[l].data();
    for (int r = 0; r < rows; ++r) {
        double acc = m.b[l][static_cast<std::size_t>(r)];
        const double* wr = W + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += wr[c] * in[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
}

}  // namespace

std::vector<double> mlp_forward(const MlpModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.input_dim()) {
        throw std::domain_error("mlp_forward: input dimension mismatch");
    }
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        affine(m, l, cur, next);
        if (l + 1 < m.layer_count()) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        }
        cur.swap(next);
    }
    return cur;
}

MlpActivations mlp_forward_cached(const MlpModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.input_dim()) {
        throw std::domain_error("mlp_forward_cached: input dimension mismatch");
    }
    MlpActivations act;
    act.a.resize(m.layer_count() + 1);
    act.z.resize(m.layer_count());
    act.a[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        affine(m, l, act.a[l], act.z[l]);
        act.a[l + 1] = act.z[l];
        if (l + 1 < m.layer_count()) {
            for (double& v : act.a[l + 1]) v = v > 0.0 ? v : 0.0;
        }
    }
    return act;
}

void MlpGrads::init_like(const MlpModel& m) {
    W.resize(m.W.size());
    b.resize(m.b.size());
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        W[l].assign(m.W[l].size(), 0.0);
        b[l].assign(m.b[l].size(), 0.0);
    }
}

void MlpGrads::scale(double c) {
    for (auto& layer : W) {
        for (double& v : layer) v *= c;
    }
    for (auto& layer : b) {
        for (double& v : layer) v *= c;
    }
}

std::vector<double> mlp_backward(const MlpModel& m, const MlpActivations& act,
                                 std::span<const double> upstream,
                                 MlpGrads& grads) {
    if (static_cast<int>(upstream.size()) != m.output_dim()) {
        throw std::domain_error("mlp_backward: upstream dimension mismatch");
    }
    std::vector<double> delta(upstream.begin(), upstream.end());
    std::vector<double> prev;
    for (std::size_t l = m.layer_count(); l-- > 0;) {
        const int rows = m.dims[l + 1];
        const int cols = m.dims[l];
        // delta currently holds dL/dz[l] for the output layer; for hidden
        // layers the caller loop below applied the ReLU mask already.
        const auto& a_in = act.a[l];
        double* gW = grads.W[l].data();
        for (int r = 0; r < rows; ++r) {
            const double dr = delta[static_cast<std::size_t>(r)];
            grads.b[l][static_cast<std::size_t>(r)] += dr;
            double* gr = gW + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) {
                gr[c] += dr * a_in[static_cast<std::size_t>(c)];
            }
        }
        prev.assign(static_cast<std::size_t>(cols), 0.0);
        const double* W = m.W[l].data();
        for (int r = 0; r < rows; ++r) {
            const double dr = delta[static_cast<std::size_t>(r)];
            const double* wr = W + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) {
                prev[static_cast<std::size_t>(c)] += dr * wr[c];
            }
        }
        if (l > 0) {
            // prev is dL/da[l]; apply the ReLU mask of layer l-1 to get dL/dz.
            for (int c = 0; c < cols; ++c) {
                if (act.z[l - 1][static_cast<std::size_t>(c)] <= 0.0) {
                    prev[static_cast<std::size_t>(c)] = 0.0;
                }
            }
        }
        delta.swap(prev);
    }
    return delta;
}

void AdamState::init_like(const MlpModel& m, double learning_rate) {
    lr = learning_rate;
    step = 0;
    mW.resize(m.W.size());
    vW.resize(m.W.size());
    mb.resize(m.b.size());
    vb.resize(m.b.size());
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        mW[l].assign(m.W[l].size(), 0.0);
        vW[l].assign(m.W[l].size(), 0.0);
        mb[l].assign(m.b[l].size(), 0.0);
        vb[l].assign(m.b[l].size(), 0.0);
    }
}

namespace {

void adam_update(std::vector<double>& param, std::vector<double>& mom,
                 std::vector<double>& vel, const std::vector<double>& grad,
                 const AdamState& s, double bc1, double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        mom[i] = s.beta1 * mom[i] + (1.0 - s.beta1) * grad[i];
        vel[i] = s.beta2 * vel[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double m_hat = mom[i] / bc1;
        const double v_hat = vel[i] / bc2;
        param[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
}

}  // namespace

void adam_step(MlpModel& m, AdamState& s, const MlpGrads& grads) {
    ++s.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        adam_update(m.W[l], s.mW[l], s.vW[l], grads.W[l], s, bc1, bc2);
        adam_update(m.b[l], s.mb[l], s.vb[l], grads.b[l], s, bc1, bc2);
    }
}

std::size_t param_count(const MlpModel& m) {
    std::size_t total = 0;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        total += m.W[l].size() + m.b[l].size();
    }
    return total;
}

std::vector<double> flatten(const MlpModel& m) {
    std::vector<double> flat;
    flat.reserve(param_count(m));
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        flat.insert(flat.end(), m.W[l].begin(), m.W[l].end());
        flat.insert(flat.end(), m.b[l].begin(), m.b[l].end());
    }
    return flat;
}

void unflatten(MlpModel& m, std::span<const double> flat) {
    if (flat.size() != param_count(m)) {
        throw std::domain_error("unflatten: parameter count mismatch");
    }
    std::size_t pos = 0;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        for (double& w : m.W[l]) w = flat[pos++];
        for (double& b : m.b[l]) b = flat[pos++];
    }
}

double param_l2_norm(const MlpModel& m) {
    double acc = 0.0;
    for (const auto& layer : m.W) {
        for (double v : layer) acc += v * v;
    }
    for (const auto& layer : m.b) {
        for (double v : layer) acc += v * v;
    }
    return std::sqrt(acc);
}

}  // namespace ndv
