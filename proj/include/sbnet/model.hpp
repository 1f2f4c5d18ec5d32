#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sbnet/dataset.hpp"
#include "sbnet/diagnostics.hpp"
#include "sbnet/linalg.hpp"
#include "sbnet/nn.hpp"
#include "sbnet/rng.hpp"

namespace sbnet {

/// Shape of one feedforward sub-network.
struct NetSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_sizes;
    Activation hidden_activation = Activation::silu;
    Activation output_activation = Activation::identity;
    std::size_t output_dim = 1;

    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// One or more balancing nets (X -> pseudo propensity score) feeding an
/// outcome net whose input is [X, T, score_1, ..., score_m].
struct SbnetArchitecture {
    std::size_t k = 0;
    std::vector<NetSpec> balancing;
    NetSpec outcome;

    std::size_t outcome_input_dim() const noexcept { return k + 1 + balancing.size(); }
    /// Column of the outcome-net input that carries balancing net `j`.
    std::size_t pps_column(std::size_t j) const noexcept { return k + 1 + j; }
    std::size_t parameter_count() const;

    /// Throws InvalidArgument / DimensionError when an invariant is broken.
    void validate() const;

    /// k covariates, one balancing net per entry of `balancing_activations`,
    /// every hidden layer sized from `hidden`.
    static SbnetArchitecture make(std::size_t k, std::vector<Activation> balancing_activations,
                                  std::vector<std::size_t> balancing_hidden = {128},
                                  std::vector<std::size_t> outcome_hidden = {128},
                                  Activation outcome_activation = Activation::silu);

    friend bool operator==(const SbnetArchitecture&, const SbnetArchitecture&) = default;
};

struct SbnetState {
    SbnetArchitecture arch;
    std::vector<std::vector<DenseLayer>> balancing;
    std::vector<DenseLayer> outcome;

    /// Shapes chain per `arch` and every parameter is finite.
    void validate() const;

    friend bool operator==(const SbnetState&, const SbnetState&) = default;
};

/// Glorot-normal weights, zero biases. Balancing nets are initialised first,
/// in order, then the outcome net.
SbnetState build(const SbnetArchitecture& arch, RngStream& rng);

struct ForwardPass {
    std::vector<std::vector<double>> pps;  // one vector per balancing net
    std::vector<double> y_hat;
    std::vector<std::vector<LayerCache>> balancing_caches;
    std::vector<LayerCache> outcome_caches;
};

ForwardPass forward(const SbnetState& state, const Matrix& x, std::span<const double> t);

enum class LossKind { mse, mae };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);

/// alpha * L1 + (1 - alpha) * L0 with L1/L0 the mean per-unit loss over
/// treated/control units. An arm absent from the input contributes 0.
double loss(std::span<const double> y_hat, std::span<const double> y, std::span<const double> t,
            double alpha, LossKind kind);

/// dL/dy_hat per unit for the loss above.
std::vector<double> loss_gradient(std::span<const double> y_hat, std::span<const double> y,
                                  std::span<const double> t, double alpha, LossKind kind);

struct SbnetGradients {
    std::vector<std::vector<LayerGrad>> balancing;
    std::vector<LayerGrad> outcome;
};

/// Exact gradient of loss() for every parameter. Each balancing net's
/// output gradient is taken from the outcome net's input gradient at that
/// net's pseudo-propensity column.
SbnetGradients backward(const SbnetState& state, const ForwardPass& pass,
                        std::span<const double> y, std::span<const double> t, double alpha,
                        LossKind kind);

enum class Optimizer { sgd, adam };

std::string_view to_string(Optimizer opt) noexcept;
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
    std::size_t epochs = 3000;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double alpha = 0.5;
    LossKind loss_kind = LossKind::mse;
    std::size_t patience = 50;
    double min_delta = 1e-4;
    double val_frac = 0.1;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::sgd;
    /// Return the parameters of the best validation epoch instead of the
    /// last one.
    bool restore_best = false;
    DistanceKind distance = DistanceKind::wasserstein1;
    /// Keep every per-epoch pseudo-propensity snapshot in the trace.
    bool keep_snapshots = false;

    void validate() const;
};

struct TrainTrace {
    std::vector<double> train_loss;  // per epoch, on the fitting rows
    std::vector<double> val_loss;    // per epoch, on the held-out rows
    ConvergenceTrace convergence;    // consecutive-snapshot distances, from epoch 2
    std::vector<std::vector<std::vector<double>>> snapshots;  // [epoch][net], optional
    std::size_t stopped_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    bool early_stopped = false;

    std::size_t epochs_run() const noexcept { return train_loss.size(); }
};

struct TrainResult {
    SbnetState state;
    TrainTrace trace;
};

/// Mini-batch training with early stopping on a held-out validation split.
TrainResult train(SbnetState state, const Dataset& data, const TrainConfig& config);

/// Outcome predictions with every unit's treatment forced to `t_forced`.
std::vector<double> predict(const SbnetState& state, const Matrix& x, double t_forced);
std::vector<double> predict(const SbnetState& state, const Matrix& x, std::span<const double> t);

/// Pseudo propensity scores, one vector per balancing net.
std::vector<std::vector<double>> extract_pps(const SbnetState& state, const Matrix& x);

/// Flat text format: versioned header, then one `key value...` line per
/// architecture field and per parameter array. Round-trips bit-exactly.
void save_state(std::ostream& out, const SbnetState& state);
SbnetState load_state(std::istream& in);

}  // namespace sbnet
