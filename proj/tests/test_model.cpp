#include <doctest.h>

#include "sbnet/errors.hpp"
#include "sbnet/model.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace sbnet;
using namespace sbnet::testing;

namespace {

SbnetState tiny_state(std::uint64_t seed, std::size_t nets, std::size_t k = 3) {
    std::vector<Activation> acts{Activation::silu, Activation::gelu};
    acts.resize(nets);
    RngStream rng(seed);
    SbnetState s = build(SbnetArchitecture::make(k, acts, {3}, {4}), rng);
    // Non-zero biases so every parameter is exercised.
    auto jitter = [&](std::vector<DenseLayer>& net) {
        for (auto& layer : net)
            for (double& b : layer.bias) b = 0.2 * (rng.uniform() - 0.5);
    };
    for (auto& net : s.balancing) jitter(net);
    jitter(s.outcome);
    return s;
}

void zero_all(SbnetState& s) {
    auto z = [](std::vector<DenseLayer>& net) {
        for (auto& layer : net) {
            std::fill(layer.weights.data().begin(), layer.weights.data().end(), 0.0);
            std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
        }
    };
    for (auto& net : s.balancing) z(net);
    z(s.outcome);
}

// Identity-activation state with one balancing net: pps = wb . x + bb,
// y = [x, t, pps] . wo + bo.
SbnetState linear_state(std::size_t k) {
    auto arch = SbnetArchitecture::make(k, {Activation::identity}, {}, {},
                                        Activation::identity);
    RngStream rng(0);
    SbnetState s = build(arch, rng);
    zero_all(s);
    return s;
}

Dataset toy_linear(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    Dataset d;
    d.x = random_matrix(rng, n, 3);
    d.t = random_treatment(rng, n);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        d.y[i] = 2.0 * d.t[i] + 0.5 * d.x(i, 0) - 1.0 * d.x(i, 1) + 0.25 * d.x(i, 2);
    return d;
}

}  // namespace

TEST_CASE("architecture and build") {
    RngStream rng(1);
    const auto single = SbnetArchitecture::make(7, {Activation::silu});
    CHECK(single.outcome.input_dim == 9);
    CHECK(single.balancing.front().hidden_sizes == std::vector<std::size_t>{128});
    const SbnetState s = build(single, rng);
    CHECK(s.outcome.front().in_dim() == 9);
    CHECK(s.outcome.front().out_dim() == 128);
    CHECK(s.balancing.front().back().out_dim() == 1);

    const auto dpp = SbnetArchitecture::make(7, {Activation::silu, Activation::gelu});
    CHECK(dpp.outcome_input_dim() == 10);
    CHECK(dpp.pps_column(1) == 9);

    RngStream a(5), b(5);
    CHECK(build(single, a) == build(single, b));

    auto broken = single;
    broken.outcome.input_dim = 8;
    CHECK_THROWS_AS(broken.validate(), DimensionError);
    RngStream c(1);
    CHECK_THROWS_AS(build(broken, c), DimensionError);
    broken = single;
    broken.balancing.front().output_activation = Activation::silu;
    CHECK_THROWS_AS(broken.validate(), InvalidArgument);
    broken = single;
    broken.balancing.clear();
    CHECK_THROWS_AS(broken.validate(), InvalidArgument);

    CHECK(tiny_state(1, 1).arch.parameter_count() == (3 * 3 + 3 + 3 + 1) + (5 * 4 + 4 + 4 + 1));
}

TEST_CASE("forward") {
    const SbnetState s = tiny_state(2, 2);
    RngStream rng(3);
    const Matrix x = random_matrix(rng, 6, 3);
    const auto p0 = forward(s, x, std::vector<double>(6, 0.0));
    const auto p1 = forward(s, x, std::vector<double>(6, 1.0));
    CHECK(p0.pps == p1.pps);
    CHECK(p0.pps.size() == 2);
    CHECK(p0.y_hat != p1.y_hat);
    CHECK_THROWS_AS(forward(s, x, std::vector<double>(6, 0.5)), InvalidArgument);
    CHECK_THROWS_AS(forward(s, x, std::vector<double>(5, 0.0)), DimensionError);
    CHECK_THROWS_AS(forward(s, Matrix(6, 4), std::vector<double>(6, 0.0)), DimensionError);

    SbnetState zero = s;
    zero_all(zero);
    const auto pz = forward(zero, x, random_treatment(rng, 6));
    for (double v : pz.y_hat) CHECK(v == 0.0);
    for (const auto& net : pz.pps)
        for (double v : net) CHECK(v == 0.0);
}

TEST_CASE("forward reproduces a hand-built affine composition") {
    // Balancing: one hidden unit, h = u1 x + b1, pps = u2 h + b2. Outcome
    // linear in [x, t, pps].
    auto arch = SbnetArchitecture::make(2, {Activation::identity}, {1}, {}, Activation::identity);
    arch.balancing.front().hidden_activation = Activation::identity;
    RngStream rng(0);
    SbnetState s = build(arch, rng);
    s.balancing[0][0] = DenseLayer{Matrix{{0.5, -2.0}}, {0.25}, Activation::identity};
    s.balancing[0][1] = DenseLayer{Matrix{{3.0}}, {-1.0}, Activation::identity};
    s.outcome[0] = DenseLayer{Matrix{{1.0, 2.0, 4.0, -0.5}}, {0.125}, Activation::identity};
    const Matrix x{{1.0, 2.0}, {-1.0, 0.5}};
    const std::vector<double> t{1.0, 0.0};
    const auto pass = forward(s, x, t);
    for (std::size_t i = 0; i < 2; ++i) {
        const double h = 0.5 * x(i, 0) - 2.0 * x(i, 1) + 0.25;
        const double pps = 3.0 * h - 1.0;
        const double y = x(i, 0) + 2.0 * x(i, 1) + 4.0 * t[i] - 0.5 * pps + 0.125;
        CHECK(pass.pps[0][i] == doctest::Approx(pps).epsilon(1e-15));
        CHECK(pass.y_hat[i] == doctest::Approx(y).epsilon(1e-15));
    }
}

TEST_CASE("loss") {
    const std::vector<double> y{1, 2, 3, 4};
    const std::vector<double> t{1, 1, 0, 0};
    CHECK(loss(y, y, t, 0.5, LossKind::mse) == 0.0);
    CHECK(loss(y, y, t, 0.5, LossKind::mae) == 0.0);

    // Treated residuals sqrt(2) (L1 = 2), control residuals 2 (L0 = 4).
    const double r = std::sqrt(2.0);
    const std::vector<double> yh{1 + r, 2 - r, 5, 2};
    CHECK(loss(yh, y, t, 0.5, LossKind::mse) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(loss(yh, y, t, 0.5, LossKind::mae) == doctest::Approx(0.5 * r + 1.0).epsilon(1e-15));

    const std::vector<double> all_treated{1, 1, 1, 1};
    const std::vector<double> yh2{2, 2, 3, 6};
    const double mse = (1.0 + 0.0 + 0.0 + 4.0) / 4.0;
    CHECK(loss(yh2, y, all_treated, 0.5, LossKind::mse) == doctest::Approx(0.5 * mse));

    CHECK_THROWS_AS(loss(yh2, y, std::vector<double>{1, 1}, 0.5, LossKind::mse), DimensionError);
    CHECK_THROWS_AS(loss(yh2, y, t, 1.0, LossKind::mse), InvalidArgument);
    CHECK(parse_loss_kind("mae") == LossKind::mae);
    CHECK_THROWS_AS(parse_loss_kind("huber"), InvalidArgument);
}

TEST_CASE("loss decomposes into the two arms") {
    RngStream rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        const auto t = random_treatment(rng, n);
        const auto y = random_vector(rng, n, -3, 3);
        const auto yh = random_vector(rng, n, -3, 3);
        const double alpha = 0.05 + 0.9 * rng.uniform();
        for (auto kind : {LossKind::mse, LossKind::mae}) {
            std::vector<double> y1, yh1, y0, yh0;
            for (std::size_t i = 0; i < n; ++i) {
                (t[i] == 1.0 ? y1 : y0).push_back(y[i]);
                (t[i] == 1.0 ? yh1 : yh0).push_back(yh[i]);
            }
            auto arm = [kind](const std::vector<double>& a, const std::vector<double>& b) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i)
                    s += kind == LossKind::mse ? (a[i] - b[i]) * (a[i] - b[i]) : std::abs(a[i] - b[i]);
                return s / static_cast<double>(a.size());
            };
            const double expected = alpha * arm(yh1, y1) + (1 - alpha) * arm(yh0, y0);
            CHECK(std::abs(loss(yh, y, t, alpha, kind) - expected) < 1e-12);
        }
    }
}

TEST_CASE("backward: gradients match finite differences") {
    RngStream rng(99);
    for (std::size_t nets : {1u, 2u}) {
        for (auto kind : {LossKind::mse, LossKind::mae}) {
            for (int trial = 0; trial < 3; ++trial) {
                const SbnetState s = tiny_state(rng.next_u64(), nets);
                const Matrix x = random_matrix(rng, 5, 3);
                const auto t = random_treatment(rng, 5);
                const auto y = random_vector(rng, 5, -2, 2);
                const auto check = gradient_check(s, x, t, y, 0.3 + 0.4 * rng.uniform(), kind);
                CHECK(check.params == s.arch.parameter_count());
                CHECK(check.max_rel_error < 1e-5);
            }
        }
    }
}

TEST_CASE("backward: shared gradient vanishes when the score weights are zero") {
    SbnetState s = tiny_state(4, 2);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t o = 0; o < s.outcome[0].out_dim(); ++o)
            s.outcome[0].weights(o, s.arch.pps_column(j)) = 0.0;
    RngStream rng(5);
    const Matrix x = random_matrix(rng, 7, 3);
    const auto t = random_treatment(rng, 7);
    const auto y = random_vector(rng, 7);
    const auto g = backward(s, forward(s, x, t), y, t, 0.5, LossKind::mse);
    for (const auto& net : g.balancing) {
        for (const auto& layer : net) {
            for (double v : layer.weights.data()) CHECK(v == 0.0);
            for (double v : layer.bias) CHECK(v == 0.0);
        }
    }
    bool outcome_nonzero = false;
    for (double v : g.outcome[0].weights.data()) outcome_nonzero |= v != 0.0;
    CHECK(outcome_nonzero);
}

TEST_CASE("backward: perfect fit has zero gradient") {
    const SbnetState s = tiny_state(6, 1);
    RngStream rng(6);
    const Matrix x = random_matrix(rng, 5, 3);
    const auto t = random_treatment(rng, 5);
    const auto pass = forward(s, x, t);
    const auto g = backward(s, pass, pass.y_hat, t, 0.5, LossKind::mse);
    SbnetState probe = s;
    for_each_param(probe, g, [](double&, double grad) { CHECK(grad == 0.0); });
}

TEST_CASE("backward rejects stale caches") {
    const SbnetState s = tiny_state(7, 1);
    RngStream rng(7);
    const Matrix x = random_matrix(rng, 5, 3);
    const auto t = random_treatment(rng, 5);
    const auto pass = forward(s, x, t);
    const auto y6 = random_vector(rng, 6);
    CHECK_THROWS_AS(backward(s, pass, y6, random_treatment(rng, 6), 0.5, LossKind::mse),
                    DimensionError);
    const SbnetState other = tiny_state(7, 2);
    CHECK_THROWS_AS(backward(other, pass, random_vector(rng, 5), t, 0.5, LossKind::mse),
                    DimensionError);
}

TEST_CASE("a small gradient step decreases the loss") {
    RngStream rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        SbnetState s = tiny_state(rng.next_u64(), 1 + trial % 2);
        const Matrix x = random_matrix(rng, 8, 3);
        const auto t = random_treatment(rng, 8);
        const auto y = random_vector(rng, 8, -2, 2);
        const double before = loss(forward(s, x, t).y_hat, y, t, 0.5, LossKind::mse);
        const auto g = backward(s, forward(s, x, t), y, t, 0.5, LossKind::mse);
        for_each_param(s, g, [](double& p, double grad) { p -= 1e-6 * grad; });
        CHECK(loss(forward(s, x, t).y_hat, y, t, 0.5, LossKind::mse) < before);
    }
}

TEST_CASE("predict and extract_pps") {
    const SbnetState s = tiny_state(13, 2);
    RngStream rng(13);
    const Matrix x = random_matrix(rng, 9, 3);
    const auto pps = extract_pps(s, x);
    CHECK(pps.size() == 2);
    CHECK(forward(s, x, std::vector<double>(9, 1.0)).pps == pps);
    CHECK(forward(s, x, std::vector<double>(9, 0.0)).pps == pps);

    const auto t = random_treatment(rng, 9);
    CHECK(predict(s, x, t) == forward(s, x, t).y_hat);
    CHECK(predict(s, x, 1.0) == forward(s, x, std::vector<double>(9, 1.0)).y_hat);
    CHECK_THROWS_AS(predict(s, x, 0.5), InvalidArgument);

    // Row permutation permutes the scores (up to vector-lane rounding).
    const std::vector<std::size_t> perm{8, 3, 0, 1, 7, 2, 6, 5, 4};
    const auto permuted = extract_pps(s, take_rows(x, perm));
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 9; ++i)
            CHECK(permuted[j][i] == doctest::Approx(pps[j][perm[i]]).epsilon(1e-12));

    SbnetState zero = s;
    zero_all(zero);
    for (const auto& net : extract_pps(zero, x))
        for (double v : net) CHECK(v == 0.0);
    CHECK_THROWS_AS(extract_pps(s, Matrix(2, 4)), DimensionError);
}

TEST_CASE("predict with a hand-built 3T state") {
    SbnetState s = linear_state(2);
    s.outcome[0].weights(0, 2) = 3.0;  // column k is T
    const Matrix x{{0.3, -0.7}, {1.0, 2.0}};
    CHECK(predict(s, x, 1.0) == std::vector<double>{3.0, 3.0});
    CHECK(predict(s, x, 0.0) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("train reduces the loss on a noiseless linear problem") {
    const Dataset d = toy_linear(200, 1);
    RngStream rng(2);
    const SbnetState init = build(SbnetArchitecture::make(3, {Activation::silu}, {16}, {16}), rng);
    TrainConfig cfg;
    cfg.epochs = 400;
    cfg.batch_size = 16;
    cfg.lr = 0.01;
    cfg.min_delta = 0.0;
    cfg.seed = 3;
    const double initial = loss(predict(init, d.x, d.t), d.y, d.t, cfg.alpha, cfg.loss_kind);
    const auto result = train(init, d, cfg);
    const double final_loss = loss(predict(result.state, d.x, d.t), d.y, d.t, cfg.alpha, cfg.loss_kind);
    CHECK(final_loss < 0.1 * initial);
    CHECK(result.trace.train_loss.back() < 0.1 * result.trace.train_loss.front());

    const auto& tr = result.trace;
    CHECK(tr.val_loss.size() == tr.epochs_run());
    CHECK(tr.stopped_epoch == tr.epochs_run());
    CHECK(tr.convergence.net_count() == 1);
    CHECK(tr.convergence.series[0].size() == tr.epochs_run() - 1);
    CHECK(tr.convergence.series[0].front().epoch == 2);
    CHECK(tr.best_val_loss == *std::min_element(tr.val_loss.begin(), tr.val_loss.end()));
}

TEST_CASE("early stopping waits exactly `patience` epochs") {
    // A vanishing learning rate keeps the validation loss constant, so only
    // the first epoch improves on the initial +infinity.
    const Dataset d = toy_linear(60, 4);
    RngStream rng(4);
    const SbnetState init = build(SbnetArchitecture::make(3, {Activation::silu}, {4}, {4}), rng);
    TrainConfig cfg;
    cfg.lr = 1e-300;
    cfg.min_delta = 0.0;
    cfg.patience = 7;
    cfg.epochs = 100;
    const auto r = train(init, d, cfg);
    CHECK(std::all_of(r.trace.val_loss.begin(), r.trace.val_loss.end(),
                      [&](double v) { return v == r.trace.val_loss.front(); }));
    CHECK(r.trace.stopped_epoch == cfg.patience + 1);
    CHECK(r.trace.early_stopped);
    CHECK(r.trace.best_epoch == 1);
}

TEST_CASE("training is deterministic") {
    const Dataset d = toy_linear(100, 5);
    RngStream r1(6), r2(6);
    const auto arch = SbnetArchitecture::make(3, {Activation::silu, Activation::gelu}, {6}, {6});
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 17;
    cfg.lr = 0.01;
    const auto a = train(build(arch, r1), d, cfg);
    const auto b = train(build(arch, r2), d, cfg);
    CHECK(a.state == b.state);
    CHECK(a.trace.train_loss == b.trace.train_loss);
    CHECK(a.trace.val_loss == b.trace.val_loss);
    CHECK(a.trace.convergence.distances(1) == b.trace.convergence.distances(1));

    cfg.seed = 18;
    RngStream r3(6);
    CHECK_FALSE(train(build(arch, r3), d, cfg).state == a.state);
}

TEST_CASE("restore_best returns the best validation epoch") {
    const Dataset d = toy_linear(80, 9);
    RngStream rng(9);
    const auto init = build(SbnetArchitecture::make(3, {Activation::silu}, {8}, {8}), rng);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.lr = 0.05;
    cfg.restore_best = true;
    cfg.keep_snapshots = true;
    const auto r = train(init, d, cfg);
    CHECK(r.trace.snapshots.size() == r.trace.epochs_run());
    CHECK(r.trace.snapshots[r.trace.best_epoch - 1] == extract_pps(r.state, d.x));
}

TEST_CASE("train rejects bad input") {
    Dataset d = toy_linear(40, 10);
    RngStream rng(10);
    const auto init = build(SbnetArchitecture::make(3, {Activation::silu}, {4}, {4}), rng);
    TrainConfig cfg;
    cfg.epochs = 5;

    Dataset treated = d;
    std::fill(treated.t.begin(), treated.t.end(), 1.0);
    CHECK_THROWS_AS(train(init, treated, cfg), InvalidArgument);

    TrainConfig bad = cfg;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(train(init, d, bad), InvalidArgument);
    bad = cfg;
    bad.lr = 0.0;
    CHECK_THROWS_AS(train(init, d, bad), InvalidArgument);

    for (auto& v : d.y) v *= 1e150;
    TrainConfig wild = cfg;
    wild.lr = 1e10;
    CHECK_THROWS_AS(train(init, d, wild), NumericalError);
}

TEST_CASE("state save/load round trip") {
    const SbnetState s = tiny_state(21, 2);
    std::stringstream io;
    save_state(io, s);
    const SbnetState back = load_state(io);
    CHECK(back == s);

    std::stringstream wrong("format something-else\nversion 1\n");
    CHECK_THROWS_AS(load_state(wrong), DataError);
    std::string text;
    {
        std::stringstream again;
        save_state(again, s);
        text = again.str();
    }
    const auto pos = text.find("outcome.layer.0.bias");
    std::stringstream truncated(text.substr(0, pos));
    CHECK_THROWS_AS(load_state(truncated), DataError);
}
