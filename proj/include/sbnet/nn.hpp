#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sbnet/linalg.hpp"
#include "sbnet/rng.hpp"

namespace sbnet {

enum class Activation { silu, gelu, identity };

std::string_view to_string(Activation kind) noexcept;
/// Accepts "silu", "gelu", "identity" (alias "linear").
Activation parse_activation(std::string_view name);

double activate(Activation kind, double z) noexcept;
double activate_prime(Activation kind, double z) noexcept;
Matrix activate(Activation kind, const Matrix& z);
Matrix activate_prime(Activation kind, const Matrix& z);

/// Fully connected layer: out = f(in * W^T + b), W is out x in.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::identity;

    std::size_t in_dim() const noexcept { return weights.cols(); }
    std::size_t out_dim() const noexcept { return weights.rows(); }
    bool all_finite() const noexcept;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Everything backprop needs from one forward pass through a layer.
struct LayerCache {
    Matrix input;   // a_prev, batch x in
    Matrix pre;     // z, batch x out
    Matrix output;  // a = f(z), batch x out
    Matrix slope;   // f'(z), batch x out
};

struct LayerGrad {
    Matrix weights;
    std::vector<double> bias;
};

struct DenseBackward {
    LayerGrad grad;
    Matrix input_grad;  // batch x in, per sample
};

LayerCache dense_forward(const DenseLayer& layer, Matrix input);

/// Backward pass for one layer. `upstream` holds per-sample gradients of the
/// output (batch x out). Parameter gradients are averaged over the batch;
/// input gradients stay per sample so they can be chained into the previous
/// layer unchanged.
///
/// `input_columns` restricts which input-gradient columns are computed (the
/// others are left zero); nullopt computes all of them, an empty span none.
DenseBackward dense_backward(
    const DenseLayer& layer, const LayerCache& cache, const Matrix& upstream,
    std::optional<std::span<const std::size_t>> input_columns = std::nullopt);

/// Applies f and f' elementwise in one pass.
void activate_with_slope(Activation kind, const Matrix& z, Matrix& out, Matrix& slope);

/// W -= lr * dW, b -= lr * db. Throws NumericalError on non-finite gradients.
void sgd_update(DenseLayer& layer, const LayerGrad& grad, double lr);

/// First/second moment buffers for the optional adaptive-moment optimizer.
struct AdamMoments {
    LayerGrad m;
    LayerGrad v;
    long step = 0;
};

AdamMoments make_adam_moments(const DenseLayer& layer);
void adam_update(DenseLayer& layer, AdamMoments& moments, const LayerGrad& grad, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7);

/// fan_out x fan_in matrix of N(0, 2 / (fan_in + fan_out)) draws.
Matrix glorot_init(RngStream& rng, std::size_t fan_in, std::size_t fan_out);

/// Glorot-normal weights, zero bias.
DenseLayer make_dense(RngStream& rng, std::size_t in, std::size_t out, Activation activation);

}  // namespace sbnet
