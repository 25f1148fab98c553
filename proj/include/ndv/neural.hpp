#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ndv/rng.hpp"

namespace ndv {

// Fully connected network: ReLU on hidden layers, identity on the output.
// W[l] has shape dims[l+1] x dims[l], stored row-major; b[l] has dims[l+1].
struct MlpModel {
    std::vector<int> dims;
    std::vector<std::vector<double>> W;
    std::vector<std::vector<double>> b;

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    std::size_t layer_count() const { return W.size(); }
};

// Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases.
MlpModel make_mlp(const std::vector<int>& dims, Rng& rng);

std::vector<double> mlp_forward(const MlpModel& m, std::span<const double> x);

// Forward pass keeping everything backward needs: a[0] = input, a[l+1] =
// post-activation of layer l, z[l] = pre-activation of layer l.
struct MlpActivations {
    std::vector<std::vector<double>> a;
    std::vector<std::vector<double>> z;
};
MlpActivations mlp_forward_cached(const MlpModel& m, std::span<const double> x);

// Parameter-shaped gradient accumulator.
struct MlpGrads {
    std::vector<std::vector<double>> W;
    std::vector<std::vector<double>> b;

    void init_like(const MlpModel& m);
    void scale(double c);
};

// Backpropagates `upstream` (= dLoss/d output) through cached activations,
// accumulating (+=) into `grads`; returns dLoss/d input.
std::vector<double> mlp_backward(const MlpModel& m, const MlpActivations& act,
                                 std::span<const double> upstream,
                                 MlpGrads& grads);

// Textbook Adam with bias correction.
struct AdamState {
    std::vector<std::vector<double>> mW, vW, mb, vb;
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init_like(const MlpModel& m, double learning_rate);
};

void adam_step(MlpModel& m, AdamState& s, const MlpGrads& grads);

// Flat parameter vector in a fixed order (layer by layer, W row-major then
// b); used by the checkpoint writer and the finite-difference tests.
std::size_t param_count(const MlpModel& m);
std::vector<double> flatten(const MlpModel& m);
void unflatten(MlpModel& m, std::span<const double> flat);

// Euclidean norm of all parameters (weights and biases).
double param_l2_norm(const MlpModel& m);

}  // namespace ndv
