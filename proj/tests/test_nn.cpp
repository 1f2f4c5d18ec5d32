#include <doctest.h>

#include "sbnet/errors.hpp"
#include "sbnet/nn.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace sbnet;
using sbnet::testing::random_matrix;
using sbnet::testing::rel_error;

TEST_CASE("activation values") {
    CHECK(activate(Activation::silu, 0.0) == 0.0);
    CHECK(activate(Activation::gelu, 0.0) == 0.0);
    CHECK(activate(Activation::identity, -2.5) == -2.5);
    CHECK(activate_prime(Activation::silu, 0.0) == doctest::Approx(0.5));
    CHECK(activate_prime(Activation::gelu, 0.0) == doctest::Approx(0.5));
    CHECK(activate_prime(Activation::identity, 3.0) == 1.0);
    // silu(1) = 1 / (1 + e^-1), gelu(1) = Phi(1)
    CHECK(activate(Activation::silu, 1.0) == doctest::Approx(0.7310585786300049));
    CHECK(activate(Activation::gelu, 1.0) == doctest::Approx(0.8413447460685429));
    const long double silu1 = 1.0L / (1.0L + std::exp(-1.0L));
    CHECK(std::abs(activate(Activation::silu, 1.0) - static_cast<double>(silu1)) < 1e-15);
    CHECK(activate(Activation::silu, -800.0) == 0.0);
    CHECK(activate(Activation::silu, 800.0) == 800.0);
}

TEST_CASE("activation derivatives match finite differences") {
    const double h = 1e-6;
    RngStream rng(3);
    for (auto kind : {Activation::silu, Activation::gelu, Activation::identity}) {
        for (int i = 0; i < 100; ++i) {
            const double z = -6.0 + 12.0 * rng.uniform();
            const double fd = (activate(kind, z + h) - activate(kind, z - h)) / (2 * h);
            CHECK(std::abs(fd - activate_prime(kind, z)) < 1e-8);
        }
    }
}

TEST_CASE("vectorised activation agrees with the scalar one") {
    RngStream rng(4);
    const Matrix z = random_matrix(rng, 37, 11, -12.0, 12.0);
    for (auto kind : {Activation::silu, Activation::gelu, Activation::identity}) {
        Matrix out, slope;
        activate_with_slope(kind, z, out, slope);
        const Matrix ref = activate(kind, z);
        const Matrix ref_slope = activate_prime(kind, z);
        for (std::size_t i = 0; i < z.size(); ++i) {
            CHECK(rel_error(out.data()[i], ref.data()[i], 1e-300) < 1e-12);
            CHECK(rel_error(slope.data()[i], ref_slope.data()[i], 1e-300) < 1e-12);
        }
    }
}

TEST_CASE("activation names") {
    CHECK(parse_activation("silu") == Activation::silu);
    CHECK(parse_activation("swish") == Activation::silu);
    CHECK(parse_activation("gelu") == Activation::gelu);
    CHECK(parse_activation("linear") == Activation::identity);
    CHECK(to_string(Activation::gelu) == "gelu");
    CHECK_THROWS_AS(parse_activation("relu"), InvalidArgument);
}

TEST_CASE("dense_forward") {
    DenseLayer layer{Matrix{{1, 2}, {3, 4}, {5, 6}}, {0.5, -0.5, 1.0}, Activation::identity};
    const auto cache = dense_forward(layer, Matrix{{1, 1}, {0, 2}});
    CHECK(cache.output == Matrix{{3.5, 6.5, 12}, {4.5, 7.5, 13}});
    CHECK(cache.slope == Matrix(2, 3, 1.0));
    CHECK_THROWS_AS(dense_forward(layer, Matrix(2, 3)), DimensionError);

    layer.activation = Activation::silu;
    const auto c2 = dense_forward(layer, Matrix{{1, 1}});
    CHECK(c2.output(0, 0) == doctest::Approx(activate(Activation::silu, 3.5)));
}

TEST_CASE("dense_backward matches finite differences") {
    // Objective (1/n) sum_ij c_ij out_ij: its parameter gradient is the
    // batch average dense_backward returns, and n times its input gradient
    // is the per-sample input gradient.
    RngStream rng(21);
    for (auto kind : {Activation::silu, Activation::gelu, Activation::identity}) {
        DenseLayer layer = make_dense(rng, 4, 3, kind);
        for (double& b : layer.bias) b = rng.uniform() - 0.5;
        const Matrix x = random_matrix(rng, 5, 4);
        const Matrix c = random_matrix(rng, 5, 3);
        const double n = 5.0;
        auto objective = [&](const DenseLayer& l, const Matrix& in) {
            const auto out = dense_forward(l, in).output;
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) s += c.data()[i] * out.data()[i];
            return s / n;
        };
        const auto cache = dense_forward(layer, x);
        const auto back = dense_backward(layer, cache, c);
        const double h = 1e-6;
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            DenseLayer p = layer, m = layer;
            p.weights.data()[i] += h;
            m.weights.data()[i] -= h;
            const double fd = (objective(p, x) - objective(m, x)) / (2 * h);
            CHECK(rel_error(back.grad.weights.data()[i], fd) < 1e-6);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            DenseLayer p = layer, m = layer;
            p.bias[i] += h;
            m.bias[i] -= h;
            const double fd = (objective(p, x) - objective(m, x)) / (2 * h);
            CHECK(rel_error(back.grad.bias[i], fd) < 1e-6);
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            Matrix p = x, m = x;
            p.data()[i] += h;
            m.data()[i] -= h;
            const double fd = (objective(layer, p) - objective(layer, m)) / (2 * h);
            CHECK(rel_error(back.input_grad.data()[i], n * fd) < 1e-6);
        }

        const std::vector<std::size_t> cols{1, 3};
        const auto partial = dense_backward(layer, cache, c, cols);
        CHECK(partial.grad.weights == back.grad.weights);
        for (std::size_t r = 0; r < 5; ++r) {
            CHECK(partial.input_grad(r, 0) == 0.0);
            CHECK(partial.input_grad(r, 2) == 0.0);
            CHECK(partial.input_grad(r, 1) == doctest::Approx(back.input_grad(r, 1)).epsilon(1e-12));
            CHECK(partial.input_grad(r, 3) == doctest::Approx(back.input_grad(r, 3)).epsilon(1e-12));
        }
    }
}

TEST_CASE("dense_backward rejects mismatched inputs") {
    RngStream rng(1);
    const DenseLayer layer = make_dense(rng, 2, 3, Activation::silu);
    const auto cache = dense_forward(layer, Matrix(4, 2, 0.3));
    CHECK_THROWS_AS(dense_backward(layer, cache, Matrix(3, 3)), DimensionError);
    CHECK_THROWS_AS(dense_backward(layer, cache, Matrix(4, 2)), DimensionError);
    const std::vector<std::size_t> bad{5};
    CHECK_THROWS_AS(dense_backward(layer, cache, Matrix(4, 3), bad), DimensionError);
}

TEST_CASE("sgd_update") {
    DenseLayer layer{Matrix{{1, 2}}, {3}, Activation::identity};
    LayerGrad g{Matrix{{10, -10}}, {1}};
    sgd_update(layer, g, 0.1);
    CHECK(layer.weights(0, 0) == doctest::Approx(0.0));
    CHECK(layer.weights(0, 1) == doctest::Approx(3.0));
    CHECK(layer.bias[0] == doctest::Approx(2.9));
    CHECK_THROWS_AS(sgd_update(layer, g, -1.0), InvalidArgument);
    g.bias[0] = std::nan("");
    CHECK_THROWS_AS(sgd_update(layer, g, 0.1), NumericalError);
    CHECK_THROWS_AS(sgd_update(layer, LayerGrad{Matrix(2, 2), {0, 0}}, 0.1), DimensionError);
}

TEST_CASE("sgd_update is linear in the gradient") {
    DenseLayer one{Matrix{{2}}, {0}, Activation::identity};
    sgd_update(one, LayerGrad{Matrix{{0.5}}, {0}}, 1.0);
    CHECK(one.weights(0, 0) == 1.5);

    RngStream rng(8);
    DenseLayer base = make_dense(rng, 3, 2, Activation::silu);
    LayerGrad g1{random_matrix(rng, 2, 3), {0.3, -0.2}};
    LayerGrad g2{random_matrix(rng, 2, 3), {-0.1, 0.4}};
    DenseLayer frozen = base;
    sgd_update(frozen, g1, 0.0);
    CHECK(frozen == base);

    DenseLayer twice = base, summed = base;
    sgd_update(twice, g1, 0.01);
    sgd_update(twice, g2, 0.01);
    LayerGrad total{g1.weights + g2.weights, {g1.bias[0] + g2.bias[0], g1.bias[1] + g2.bias[1]}};
    sgd_update(summed, total, 0.01);
    CHECK(max_abs_diff(twice.weights, summed.weights) < 1e-15);
    CHECK(std::abs(twice.bias[1] - summed.bias[1]) < 1e-15);
}

TEST_CASE("adam first step moves each parameter by about lr") {
    DenseLayer layer{Matrix{{1, 2}}, {3}, Activation::identity};
    auto moments = make_adam_moments(layer);
    adam_update(layer, moments, LayerGrad{Matrix{{5, -0.1}}, {2}}, 0.01);
    CHECK(layer.weights(0, 0) == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(layer.weights(0, 1) == doctest::Approx(2.01).epsilon(1e-6));
    CHECK(layer.bias[0] == doctest::Approx(2.99).epsilon(1e-6));
    CHECK(moments.step == 1);
}

TEST_CASE("glorot initialisation") {
    RngStream rng(77);
    const Matrix w = glorot_init(rng, 300, 200);
    CHECK(w.rows() == 200);
    CHECK(w.cols() == 300);
    const double var = sample_variance(w.data());
    CHECK(std::abs(var - 2.0 / 500.0) < 0.05 * 2.0 / 500.0);
    CHECK(std::abs(mean(w.data())) < 0.001);
    CHECK_THROWS_AS(glorot_init(rng, 0, 3), InvalidArgument);

    std::vector<double> unit;
    for (int i = 0; i < 100000; ++i) unit.push_back(glorot_init(rng, 1, 1)(0, 0));
    CHECK(std::abs(sample_variance(unit) - 1.0) < 0.05);
    const Matrix square = glorot_init(rng, 500, 500);
    CHECK(std::abs(sample_variance(square.data()) - 2.0 / 1000.0) < 0.1 * 2.0 / 1000.0);

    const DenseLayer layer = make_dense(rng, 3, 4, Activation::gelu);
    CHECK(layer.bias == std::vector<double>(4, 0.0));
    CHECK(layer.in_dim() == 3);
    CHECK(layer.out_dim() == 4);
}
