#include "sbnet/nn.hpp"

#include "sbnet/errors.hpp"

#include "activation_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sbnet {

namespace {

double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

bool finite_grad(const LayerGrad& g) {
    return g.weights.all_finite() &&
           std::all_of(g.bias.begin(), g.bias.end(), [](double v) { return std::isfinite(v); });
}

void check_grad_shape(const DenseLayer& layer, const LayerGrad& grad, const char* op) {
    if (grad.weights.rows() != layer.weights.rows() ||
        grad.weights.cols() != layer.weights.cols() || grad.bias.size() != layer.bias.size()) {
        throw DimensionError(std::string(op) + ": gradient shape does not match layer");
    }
}

}  // namespace

std::string_view to_string(Activation kind) noexcept {
    switch (kind) {
        case Activation::silu: return "silu";
        case Activation::gelu: return "gelu";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "silu" || name == "swish") return Activation::silu;
    if (name == "gelu") return Activation::gelu;
    if (name == "identity" || name == "linear") return Activation::identity;
    throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

double activate(Activation kind, double z) noexcept {
    switch (kind) {
        case Activation::silu: return z * logistic(z);
        case Activation::gelu: return z * std_normal_cdf(z);
        case Activation::identity: return z;
    }
    return z;
}

double activate_prime(Activation kind, double z) noexcept {
    switch (kind) {
        case Activation::silu: {
            const double s = logistic(z);
            return s * (1.0 + z * (1.0 - s));
        }
        case Activation::gelu: return std_normal_cdf(z) + z * std_normal_pdf(z);
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

Matrix activate(Activation kind, const Matrix& z) {
    Matrix out = z;
    if (kind != Activation::identity)
        for (double& v : out.data()) v = activate(kind, v);
    return out;
}

void activate_with_slope(Activation kind, const Matrix& z, Matrix& out, Matrix& slope) {
    out = z;
    slope = Matrix(z.rows(), z.cols(), 1.0);
    const std::size_t n = z.size();
    const double* zp = z.data().data();
    double* op = out.data().data();
    double* sp = slope.data().data();
    switch (kind) {
        case Activation::silu: kernels::silu(n, zp, op, sp); break;
        case Activation::gelu: kernels::gelu(n, zp, op, sp); break;
        case Activation::identity: break;
    }
}

Matrix activate_prime(Activation kind, const Matrix& z) {
    Matrix out(z.rows(), z.cols(), 1.0);
    if (kind != Activation::identity)
        for (std::size_t i = 0; i < z.size(); ++i) out.data()[i] = activate_prime(kind, z.data()[i]);
    return out;
}

bool DenseLayer::all_finite() const noexcept {
    return weights.all_finite() &&
           std::all_of(bias.begin(), bias.end(), [](double v) { return std::isfinite(v); });
}

LayerCache dense_forward(const DenseLayer& layer, Matrix input) {
    if (input.cols() != layer.in_dim()) {
        throw DimensionError("dense_forward: input has " + std::to_string(input.cols()) +
                             " features, layer expects " + std::to_string(layer.in_dim()));
    }
    if (layer.bias.size() != layer.out_dim()) {
        throw DimensionError("dense_forward: bias length does not match layer width");
    }
    LayerCache cache;
    cache.pre = matmul_nt(input, layer.weights);
    const std::size_t out = layer.out_dim();
    for (std::size_t r = 0; r < cache.pre.rows(); ++r) {
        double* z = cache.pre.row(r).data();
        for (std::size_t o = 0; o < out; ++o) z[o] += layer.bias[o];
    }
    activate_with_slope(layer.activation, cache.pre, cache.output, cache.slope);
    cache.input = std::move(input);
    return cache;
}

DenseBackward dense_backward(const DenseLayer& layer, const LayerCache& cache,
                             const Matrix& upstream,
                             std::optional<std::span<const std::size_t>> input_columns) {
    const std::size_t batch = upstream.rows();
    const std::size_t out_dim = layer.out_dim();
    if (batch != cache.pre.rows() || upstream.cols() != out_dim ||
        cache.input.cols() != layer.in_dim() || cache.input.rows() != batch ||
        cache.slope.rows() != batch || cache.slope.cols() != out_dim) {
        throw DimensionError("dense_backward: upstream/cache shape does not match layer");
    }
    if (batch == 0) throw DimensionError("dense_backward: empty batch");

    Matrix delta = upstream;
    if (layer.activation != Activation::identity) {
        for (std::size_t i = 0; i < delta.size(); ++i) delta.data()[i] *= cache.slope.data()[i];
    }

    const double inv_n = 1.0 / static_cast<double>(batch);
    DenseBackward out;
    // Both routes accumulate over the batch in the same order; pick the one
    // whose inner loop is longer.
    out.grad.weights = layer.in_dim() >= out_dim ? matmul_tn(delta, cache.input)
                                                 : transpose(matmul_tn(cache.input, delta));
    for (double& w : out.grad.weights.data()) w *= inv_n;
    out.grad.bias.assign(out_dim, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
        const double* d = delta.row(r).data();
        for (std::size_t o = 0; o < out_dim; ++o) out.grad.bias[o] += d[o];
    }
    for (double& b : out.grad.bias) b *= inv_n;

    if (!input_columns) {
        out.input_grad = matmul(delta, layer.weights);
    } else {
        out.input_grad = Matrix(batch, layer.in_dim());
        for (std::size_t c : *input_columns) {
            if (c >= layer.in_dim()) throw DimensionError("dense_backward: input column out of range");
            const std::vector<double> wc = layer.weights.col(c);
            for (std::size_t r = 0; r < batch; ++r) {
                const double* d = delta.row(r).data();
                double s = 0.0;
                for (std::size_t o = 0; o < out_dim; ++o) s += d[o] * wc[o];
                out.input_grad(r, c) = s;
            }
        }
    }
    return out;
}

void sgd_update(DenseLayer& layer, const LayerGrad& grad, double lr) {
    if (!(lr >= 0.0)) throw InvalidArgument("sgd_update: learning rate must be non-negative");
    check_grad_shape(layer, grad, "sgd_update");
    if (!finite_grad(grad)) throw NumericalError("sgd_update: non-finite gradient");
    auto& w = layer.weights.data();
    const auto& gw = grad.weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * grad.bias[i];
}

AdamMoments make_adam_moments(const DenseLayer& layer) {
    AdamMoments m;
    m.m.weights = Matrix(layer.out_dim(), layer.in_dim());
    m.m.bias.assign(layer.out_dim(), 0.0);
    m.v = m.m;
    return m;
}

void adam_update(DenseLayer& layer, AdamMoments& moments, const LayerGrad& grad, double lr,
                 double beta1, double beta2, double eps) {
    if (!(lr >= 0.0)) throw InvalidArgument("adam_update: learning rate must be non-negative");
    check_grad_shape(layer, grad, "adam_update");
    if (!finite_grad(grad)) throw NumericalError("adam_update: non-finite gradient");
    ++moments.step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(moments.step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(moments.step));
    auto step = [&](double& param, double& m, double& v, double g) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        param -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    };
    auto& w = layer.weights.data();
    for (std::size_t i = 0; i < w.size(); ++i)
        step(w[i], moments.m.weights.data()[i], moments.v.weights.data()[i], grad.weights.data()[i]);
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
        step(layer.bias[i], moments.m.bias[i], moments.v.bias[i], grad.bias[i]);
}

Matrix glorot_init(RngStream& rng, std::size_t fan_in, std::size_t fan_out) {
    if (fan_in == 0 || fan_out == 0) throw InvalidArgument("glorot_init: fans must be positive");
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    return gaussian_sample(rng, 0.0, std, fan_out, fan_in);
}

DenseLayer make_dense(RngStream& rng, std::size_t in, std::size_t out, Activation activation) {
    return DenseLayer{glorot_init(rng, in, out), std::vector<double>(out, 0.0), activation};
}

}  // namespace sbnet
