#include "sbnet/model.hpp"

#include "sbnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace sbnet {

// ---------------------------------------------------------------------------
// Architecture and state

std::size_t SbnetArchitecture::parameter_count() const {
    auto count = [](const NetSpec& s) {
        std::size_t total = 0;
        std::size_t in = s.input_dim;
        for (std::size_t h : s.hidden_sizes) {
            total += h * in + h;
            in = h;
        }
        return total + s.output_dim * in + s.output_dim;
    };
    std::size_t total = count(outcome);
    for (const auto& b : balancing) total += count(b);
    return total;
}

void SbnetArchitecture::validate() const {
    if (k == 0) throw InvalidArgument("architecture: k must be positive");
    if (balancing.empty()) throw InvalidArgument("architecture: need at least one balancing net");
    auto check_net = [](const NetSpec& s, const std::string& name) {
        if (s.output_activation != Activation::identity) {
            throw InvalidArgument("architecture: " + name + " output activation must be identity");
        }
        for (std::size_t h : s.hidden_sizes)
            if (h == 0) throw InvalidArgument("architecture: " + name + " has an empty hidden layer");
    };
    for (std::size_t j = 0; j < balancing.size(); ++j) {
        const std::string name = "balancing net " + std::to_string(j);
        check_net(balancing[j], name);
        if (balancing[j].input_dim != k)
            throw DimensionError("architecture: " + name + " input dim must equal k");
        if (balancing[j].output_dim != 1)
            throw DimensionError("architecture: " + name + " must output one score");
    }
    check_net(outcome, "outcome net");
    if (outcome.input_dim != outcome_input_dim()) {
        throw DimensionError("architecture: outcome input dim is " +
                             std::to_string(outcome.input_dim) + ", expected k + 1 + " +
                             std::to_string(balancing.size()) + " = " +
                             std::to_string(outcome_input_dim()));
    }
    if (outcome.output_dim != 1) throw DimensionError("architecture: outcome net must output 1");
}

SbnetArchitecture SbnetArchitecture::make(std::size_t k,
                                          std::vector<Activation> balancing_activations,
                                          std::vector<std::size_t> balancing_hidden,
                                          std::vector<std::size_t> outcome_hidden,
                                          Activation outcome_activation) {
    SbnetArchitecture arch;
    arch.k = k;
    for (Activation a : balancing_activations)
        arch.balancing.push_back(NetSpec{k, balancing_hidden, a, Activation::identity, 1});
    arch.outcome = NetSpec{k + 1 + balancing_activations.size(), std::move(outcome_hidden),
                           outcome_activation, Activation::identity, 1};
    arch.validate();
    return arch;
}

namespace {

void check_chain(const std::vector<DenseLayer>& layers, const NetSpec& spec,
                 const std::string& name) {
    if (layers.size() != spec.hidden_sizes.size() + 1)
        throw DimensionError("state: " + name + " has the wrong number of layers");
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::size_t out =
            l < spec.hidden_sizes.size() ? spec.hidden_sizes[l] : spec.output_dim;
        const Activation act =
            l < spec.hidden_sizes.size() ? spec.hidden_activation : spec.output_activation;
        const auto& layer = layers[l];
        if (layer.in_dim() != in || layer.out_dim() != out || layer.bias.size() != out)
            throw DimensionError("state: " + name + " layer " + std::to_string(l) +
                                 " has the wrong shape");
        if (layer.activation != act)
            throw InvalidArgument("state: " + name + " layer " + std::to_string(l) +
                                  " has the wrong activation");
        if (!layer.all_finite())
            throw NumericalError("state: " + name + " layer " + std::to_string(l) +
                                 " has non-finite parameters");
        in = out;
    }
}

std::vector<DenseLayer> build_net(const NetSpec& spec, RngStream& rng) {
    std::vector<DenseLayer> layers;
    std::size_t in = spec.input_dim;
    for (std::size_t h : spec.hidden_sizes) {
        layers.push_back(make_dense(rng, in, h, spec.hidden_activation));
        in = h;
    }
    layers.push_back(make_dense(rng, in, spec.output_dim, spec.output_activation));
    return layers;
}

}  // namespace

void SbnetState::validate() const {
    arch.validate();
    if (balancing.size() != arch.balancing.size())
        throw DimensionError("state: balancing net count does not match architecture");
    for (std::size_t j = 0; j < balancing.size(); ++j)
        check_chain(balancing[j], arch.balancing[j], "balancing net " + std::to_string(j));
    check_chain(outcome, arch.outcome, "outcome net");
}

SbnetState build(const SbnetArchitecture& arch, RngStream& rng) {
    arch.validate();
    SbnetState state;
    state.arch = arch;
    for (const auto& spec : arch.balancing) state.balancing.push_back(build_net(spec, rng));
    state.outcome = build_net(arch.outcome, rng);
    return state;
}

// ---------------------------------------------------------------------------
// Forward / loss / backward

namespace {

std::vector<LayerCache> run_net(const std::vector<DenseLayer>& layers, Matrix input) {
    std::vector<LayerCache> caches;
    caches.reserve(layers.size());
    for (const auto& layer : layers) {
        caches.push_back(dense_forward(layer, std::move(input)));
        input = caches.back().output;
    }
    return caches;
}

}  // namespace

ForwardPass forward(const SbnetState& state, const Matrix& x, std::span<const double> t) {
    const auto& arch = state.arch;
    if (x.cols() != arch.k) {
        throw DimensionError("forward: X has " + std::to_string(x.cols()) +
                             " columns, model expects " + std::to_string(arch.k));
    }
    if (t.size() != x.rows()) throw DimensionError("forward: |T| does not match rows of X");
    require_binary(t, "forward: treatment");

    const std::size_t n = x.rows();
    ForwardPass pass;
    for (const auto& net : state.balancing) {
        pass.balancing_caches.push_back(run_net(net, x));
        pass.pps.push_back(pass.balancing_caches.back().back().output.data());
    }

    Matrix input(n, arch.outcome_input_dim());
    for (std::size_t r = 0; r < n; ++r) {
        auto dst = input.row(r);
        std::copy(x.row(r).begin(), x.row(r).end(), dst.begin());
        dst[arch.k] = t[r];
        for (std::size_t j = 0; j < pass.pps.size(); ++j) dst[arch.pps_column(j)] = pass.pps[j][r];
    }
    pass.outcome_caches = run_net(state.outcome, std::move(input));
    pass.y_hat = pass.outcome_caches.back().output.data();
    return pass;
}

std::string_view to_string(LossKind kind) noexcept { return kind == LossKind::mse ? "mse" : "mae"; }

LossKind parse_loss_kind(std::string_view name) {
    if (name == "mse") return LossKind::mse;
    if (name == "mae") return LossKind::mae;
    throw InvalidArgument("unknown loss kind '" + std::string(name) + "'");
}

namespace {

void check_loss_inputs(std::span<const double> y_hat, std::span<const double> y,
                       std::span<const double> t, double alpha) {
    if (y_hat.size() != y.size() || y.size() != t.size())
        throw DimensionError("loss: y_hat, y and t must have equal length");
    if (y.empty()) throw InvalidArgument("loss: no units");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("loss: alpha must lie in (0, 1)");
    require_binary(t, "loss: treatment");
}

double unit_loss(double residual, LossKind kind) noexcept {
    return kind == LossKind::mse ? residual * residual : std::abs(residual);
}

double unit_loss_prime(double residual, LossKind kind) noexcept {
    if (kind == LossKind::mse) return 2.0 * residual;
    return residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
}

}  // namespace

double loss(std::span<const double> y_hat, std::span<const double> y, std::span<const double> t,
            double alpha, LossKind kind) {
    check_loss_inputs(y_hat, y, t, alpha);
    double sum1 = 0.0, sum0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double l = unit_loss(y_hat[i] - y[i], kind);
        if (t[i] == 1.0) {
            sum1 += l;
            ++n1;
        } else {
            sum0 += l;
            ++n0;
        }
    }
    const double l1 = n1 ? sum1 / static_cast<double>(n1) : 0.0;
    const double l0 = n0 ? sum0 / static_cast<double>(n0) : 0.0;
    return alpha * l1 + (1.0 - alpha) * l0;
}

std::vector<double> loss_gradient(std::span<const double> y_hat, std::span<const double> y,
                                  std::span<const double> t, double alpha, LossKind kind) {
    check_loss_inputs(y_hat, y, t, alpha);
    const auto n1 = static_cast<std::size_t>(std::count(t.begin(), t.end(), 1.0));
    const std::size_t n0 = t.size() - n1;
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double w = t[i] == 1.0 ? alpha / static_cast<double>(n1)
                                     : (1.0 - alpha) / static_cast<double>(n0);
        g[i] = w * unit_loss_prime(y_hat[i] - y[i], kind);
    }
    return g;
}

namespace {

/// Backprop through one net; returns parameter gradients in layer order.
/// `input_columns` selects which columns of the net-input gradient are
/// needed (written to `input_grad`); none when empty.
std::vector<LayerGrad> backprop_net(const std::vector<DenseLayer>& layers,
                                    const std::vector<LayerCache>& caches, Matrix upstream,
                                    std::span<const std::size_t> input_columns,
                                    Matrix* input_grad) {
    std::vector<LayerGrad> grads(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        std::optional<std::span<const std::size_t>> cols;
        if (l == 0) cols = input_columns;
        auto step = dense_backward(layers[l], caches[l], upstream, cols);
        grads[l] = std::move(step.grad);
        upstream = std::move(step.input_grad);
    }
    if (input_grad) *input_grad = std::move(upstream);
    return grads;
}

void check_caches(const SbnetState& state, const ForwardPass& pass, std::size_t n) {
    auto matches = [n](const std::vector<DenseLayer>& layers,
                       const std::vector<LayerCache>& caches) {
        if (layers.size() != caches.size()) return false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (caches[l].pre.rows() != n || caches[l].pre.cols() != layers[l].out_dim() ||
                caches[l].input.cols() != layers[l].in_dim())
                return false;
        }
        return true;
    };
    bool ok = pass.y_hat.size() == n && pass.balancing_caches.size() == state.balancing.size() &&
              matches(state.outcome, pass.outcome_caches);
    for (std::size_t j = 0; ok && j < state.balancing.size(); ++j)
        ok = matches(state.balancing[j], pass.balancing_caches[j]);
    if (!ok) throw DimensionError("backward: caches do not match this state and batch");
}

}  // namespace

SbnetGradients backward(const SbnetState& state, const ForwardPass& pass,
                        std::span<const double> y, std::span<const double> t, double alpha,
                        LossKind kind) {
    const std::size_t n = y.size();
    check_caches(state, pass, n);
    const auto dl = loss_gradient(pass.y_hat, y, t, alpha, kind);

    // dense_backward averages parameter gradients over the batch, so the
    // per-sample upstream carries a factor n to keep the result exact.
    Matrix upstream(n, 1);
    for (std::size_t i = 0; i < n; ++i) upstream(i, 0) = static_cast<double>(n) * dl[i];

    SbnetGradients grads;
    std::vector<std::size_t> pps_cols;
    for (std::size_t j = 0; j < state.balancing.size(); ++j)
        pps_cols.push_back(state.arch.pps_column(j));
    Matrix outcome_input_grad;
    grads.outcome = backprop_net(state.outcome, pass.outcome_caches, std::move(upstream),
                                 pps_cols, &outcome_input_grad);

    // Shared gradient: each balancing net is driven by the outcome net's input
    // gradient at its own score column (u_* . delta of the first outcome layer).
    for (std::size_t j = 0; j < state.balancing.size(); ++j) {
        Matrix shared(n, 1);
        const std::size_t col = state.arch.pps_column(j);
        for (std::size_t i = 0; i < n; ++i) shared(i, 0) = outcome_input_grad(i, col);
        grads.balancing.push_back(
            backprop_net(state.balancing[j], pass.balancing_caches[j], std::move(shared), {},
                         nullptr));
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Training

std::string_view to_string(Optimizer opt) noexcept { return opt == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "adam") return Optimizer::adam;
    throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw InvalidArgument("train: epochs must be positive");
    if (batch_size == 0) throw InvalidArgument("train: batch_size must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("train: lr must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("train: alpha must lie in (0, 1)");
    if (patience == 0) throw InvalidArgument("train: patience must be positive");
    if (!(min_delta >= 0.0)) throw InvalidArgument("train: min_delta must be non-negative");
    if (!(val_frac > 0.0 && val_frac < 1.0))
        throw InvalidArgument("train: val_frac must lie in (0, 1)");
}

namespace {

class ParameterUpdater {
public:
    ParameterUpdater(const SbnetState& state, const TrainConfig& config)
        : optimizer_(config.optimizer), lr_(config.lr) {
        if (optimizer_ == Optimizer::adam) {
            for (const auto& net : state.balancing) {
                auto& moments = balancing_.emplace_back();
                for (const auto& layer : net) moments.push_back(make_adam_moments(layer));
            }
            for (const auto& layer : state.outcome) outcome_.push_back(make_adam_moments(layer));
        }
    }

    void apply(SbnetState& state, const SbnetGradients& grads) {
        for (std::size_t j = 0; j < state.balancing.size(); ++j)
            for (std::size_t l = 0; l < state.balancing[j].size(); ++l)
                update(state.balancing[j][l], grads.balancing[j][l],
                       optimizer_ == Optimizer::adam ? &balancing_[j][l] : nullptr);
        for (std::size_t l = 0; l < state.outcome.size(); ++l)
            update(state.outcome[l], grads.outcome[l],
                   optimizer_ == Optimizer::adam ? &outcome_[l] : nullptr);
    }

private:
    void update(DenseLayer& layer, const LayerGrad& grad, AdamMoments* moments) {
        if (moments)
            adam_update(layer, *moments, grad, lr_);
        else
            sgd_update(layer, grad, lr_);
    }

    Optimizer optimizer_;
    double lr_;
    std::vector<std::vector<AdamMoments>> balancing_;
    std::vector<AdamMoments> outcome_;
};

double subset_loss(std::span<const double> y_hat, const Dataset& data,
                   std::span<const std::size_t> rows, const TrainConfig& config) {
    std::vector<double> yh, y, t;
    yh.reserve(rows.size());
    y.reserve(rows.size());
    t.reserve(rows.size());
    for (std::size_t i : rows) {
        yh.push_back(y_hat[i]);
        y.push_back(data.y[i]);
        t.push_back(data.t[i]);
    }
    return loss(yh, y, t, config.alpha, config.loss_kind);
}

}  // namespace

TrainResult train(SbnetState state, const Dataset& data, const TrainConfig& config) {
    config.validate();
    data.validate();
    state.validate();
    if (data.k() != state.arch.k) {
        throw DimensionError("train: dataset has " + std::to_string(data.k()) +
                             " covariates, model expects " + std::to_string(state.arch.k));
    }
    if (!data.has_both_arms()) {
        throw InvalidArgument("train: dataset must contain both treated and control units");
    }
    const std::size_t n = data.n();
    if (n < 2) throw InvalidArgument("train: need at least two units");

    // Fixed validation split: last val_frac of a seeded shuffle.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    RngStream split_rng(derive_seed(config.seed, "validation-split", 0));
    split_rng.shuffle(perm);
    auto n_val = static_cast<std::size_t>(std::lround(config.val_frac * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    const std::vector<std::size_t> fit_rows(perm.begin(), perm.end() - static_cast<long>(n_val));
    const std::vector<std::size_t> val_rows(perm.end() - static_cast<long>(n_val), perm.end());
    const Dataset fit = data.subset(fit_rows);

    RngStream order_rng(derive_seed(config.seed, "batch-order", 0));
    ParameterUpdater updater(state, config);

    TrainTrace trace;
    trace.convergence.kind = config.distance;
    trace.convergence.series.resize(state.balancing.size());
    std::vector<std::vector<double>> prev_pps;
    std::optional<SbnetState> best_state;
    std::size_t wait = 0;

    std::vector<std::size_t> order(fit.n());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const Dataset batch = fit.subset(rows);
            const auto pass = forward(state, batch.x, batch.t);
            const auto grads =
                backward(state, pass, batch.y, batch.t, config.alpha, config.loss_kind);
            updater.apply(state, grads);
        }

        const auto full = forward(state, data.x, data.t);
        const double train_loss = subset_loss(full.y_hat, data, fit_rows, config);
        const double val_loss = subset_loss(full.y_hat, data, val_rows, config);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " (train " + std::to_string(train_loss) + ", val " +
                                 std::to_string(val_loss) + "); try a smaller learning rate");
        }
        trace.train_loss.push_back(train_loss);
        trace.val_loss.push_back(val_loss);
        if (!prev_pps.empty()) {
            for (std::size_t j = 0; j < full.pps.size(); ++j)
                trace.convergence.series[j].push_back(
                    {epoch, sample_distance(config.distance, prev_pps[j], full.pps[j])});
        }
        if (config.keep_snapshots) trace.snapshots.push_back(full.pps);
        prev_pps = full.pps;
        trace.stopped_epoch = epoch;

        if (val_loss < trace.best_val_loss - config.min_delta) {
            trace.best_val_loss = val_loss;
            trace.best_epoch = epoch;
            wait = 0;
            if (config.restore_best) best_state = state;
        } else if (++wait >= config.patience) {
            trace.early_stopped = true;
            break;
        }
    }

    if (config.restore_best && best_state) state = std::move(*best_state);
    return {std::move(state), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<double> predict(const SbnetState& state, const Matrix& x, double t_forced) {
    if (t_forced != 0.0 && t_forced != 1.0)
        throw InvalidArgument("predict: forced treatment must be 0 or 1");
    const std::vector<double> t(x.rows(), t_forced);
    return forward(state, x, t).y_hat;
}

std::vector<double> predict(const SbnetState& state, const Matrix& x, std::span<const double> t) {
    return forward(state, x, t).y_hat;
}

std::vector<std::vector<double>> extract_pps(const SbnetState& state, const Matrix& x) {
    if (x.cols() != state.arch.k) throw DimensionError("extract_pps: X has the wrong width");
    std::vector<std::vector<double>> out;
    for (const auto& net : state.balancing) out.push_back(run_net(net, x).back().output.data());
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kStateFormat = "sbnet-state";
constexpr int kStateVersion = 1;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_net_spec(std::ostream& out, const std::string& prefix, const NetSpec& s) {
    out << prefix << ".input_dim " << s.input_dim << '\n';
    out << prefix << ".hidden_sizes " << s.hidden_sizes.size();
    for (auto h : s.hidden_sizes) out << ' ' << h;
    out << '\n';
    out << prefix << ".hidden_activation " << to_string(s.hidden_activation) << '\n';
    out << prefix << ".output_activation " << to_string(s.output_activation) << '\n';
    out << prefix << ".output_dim " << s.output_dim << '\n';
}

void write_layers(std::ostream& out, const std::string& prefix,
                  const std::vector<DenseLayer>& layers) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const std::string p = prefix + ".layer." + std::to_string(l);
        out << p << ".weights " << layer.weights.rows() << ' ' << layer.weights.cols();
        for (double v : layer.weights.data()) out << ' ' << fmt_double(v);
        out << '\n' << p << ".bias " << layer.bias.size();
        for (double v : layer.bias) out << ' ' << fmt_double(v);
        out << '\n';
    }
}

class KeyedRecords {
public:
    explicit KeyedRecords(std::istream& in) {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            const auto sp = line.find(' ');
            const std::string key = line.substr(0, sp);
            records_[key] = sp == std::string::npos ? std::string() : line.substr(sp + 1);
        }
    }

    std::istringstream get(const std::string& key) const {
        auto it = records_.find(key);
        if (it == records_.end()) throw DataError("state file: missing key '" + key + "'");
        return std::istringstream(it->second);
    }

    template <typename T>
    T scalar(const std::string& key) const {
        auto in = get(key);
        T v{};
        if (!(in >> v)) throw DataError("state file: bad value for '" + key + "'");
        return v;
    }

private:
    std::map<std::string, std::string> records_;
};

double parse_double(std::istringstream& in, const std::string& key) {
    std::string tok;
    if (!(in >> tok)) throw DataError("state file: '" + key + "' is truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw DataError("state file: bad number in '" + key + "'");
    return v;
}

NetSpec read_net_spec(const KeyedRecords& rec, const std::string& prefix) {
    NetSpec s;
    s.input_dim = rec.scalar<std::size_t>(prefix + ".input_dim");
    auto hs = rec.get(prefix + ".hidden_sizes");
    std::size_t count = 0;
    hs >> count;
    s.hidden_sizes.resize(count);
    for (auto& h : s.hidden_sizes)
        if (!(hs >> h)) throw DataError("state file: bad hidden sizes for " + prefix);
    s.hidden_activation = parse_activation(rec.scalar<std::string>(prefix + ".hidden_activation"));
    s.output_activation = parse_activation(rec.scalar<std::string>(prefix + ".output_activation"));
    s.output_dim = rec.scalar<std::size_t>(prefix + ".output_dim");
    return s;
}

std::vector<DenseLayer> read_layers(const KeyedRecords& rec, const std::string& prefix,
                                    const NetSpec& spec) {
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l <= spec.hidden_sizes.size(); ++l) {
        const std::string p = prefix + ".layer." + std::to_string(l);
        DenseLayer layer;
        layer.activation =
            l < spec.hidden_sizes.size() ? spec.hidden_activation : spec.output_activation;
        const std::string wkey = p + ".weights";
        auto w = rec.get(wkey);
        std::size_t rows = 0, cols = 0;
        if (!(w >> rows >> cols)) throw DataError("state file: bad shape for '" + wkey + "'");
        std::vector<double> data(rows * cols);
        for (double& v : data) v = parse_double(w, wkey);
        layer.weights = Matrix(rows, cols, std::move(data));
        const std::string bkey = p + ".bias";
        auto b = rec.get(bkey);
        std::size_t len = 0;
        if (!(b >> len)) throw DataError("state file: bad length for '" + bkey + "'");
        layer.bias.resize(len);
        for (double& v : layer.bias) v = parse_double(b, bkey);
        layers.push_back(std::move(layer));
    }
    return layers;
}

}  // namespace

void save_state(std::ostream& out, const SbnetState& state) {
    out << "format " << kStateFormat << '\n';
    out << "version " << kStateVersion << '\n';
    out << "k " << state.arch.k << '\n';
    out << "balancing.count " << state.arch.balancing.size() << '\n';
    for (std::size_t j = 0; j < state.arch.balancing.size(); ++j)
        write_net_spec(out, "balancing." + std::to_string(j), state.arch.balancing[j]);
    write_net_spec(out, "outcome", state.arch.outcome);
    for (std::size_t j = 0; j < state.balancing.size(); ++j)
        write_layers(out, "balancing." + std::to_string(j), state.balancing[j]);
    write_layers(out, "outcome", state.outcome);
    if (!out) throw DataError("save_state: write failed");
}

SbnetState load_state(std::istream& in) {
    const KeyedRecords rec(in);
    if (rec.scalar<std::string>("format") != kStateFormat)
        throw DataError("state file: not an sbnet-state file");
    const int version = rec.scalar<int>("version");
    if (version != kStateVersion)
        throw DataError("state file: unsupported version " + std::to_string(version));
    SbnetState state;
    state.arch.k = rec.scalar<std::size_t>("k");
    const auto count = rec.scalar<std::size_t>("balancing.count");
    for (std::size_t j = 0; j < count; ++j)
        state.arch.balancing.push_back(read_net_spec(rec, "balancing." + std::to_string(j)));
    state.arch.outcome = read_net_spec(rec, "outcome");
    for (std::size_t j = 0; j < count; ++j)
        state.balancing.push_back(
            read_layers(rec, "balancing." + std::to_string(j), state.arch.balancing[j]));
    state.outcome = read_layers(rec, "outcome", state.arch.outcome);
    state.validate();
    return state;
}

}  // namespace sbnet
