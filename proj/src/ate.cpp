#include "sbnet/ate.hpp"

#include "sbnet/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace sbnet {

double estimate_ate(const SbnetState& state, const Matrix& x) {
    if (x.rows() == 0) throw InvalidArgument("estimate_ate: X is empty");
    const auto y1 = predict(state, x, 1.0);
    const auto y0 = predict(state, x, 0.0);
    return mean(y1) - mean(y0);
}

Fitter make_sbnet_fitter(SbnetArchitecture arch, TrainConfig config, Dataset test) {
    return [arch = std::move(arch), config = std::move(config), test = std::move(test)](
               const Dataset& train_data, std::uint64_t seed, bool primary) {
        TrainConfig cfg = config;
        cfg.seed = seed;
        RngStream init(derive_seed(seed, "init", 0));
        TrainResult result = train(build(arch, init), train_data, cfg);
        FitOutcome out;
        out.ate_train = estimate_ate(result.state, train_data.x);
        out.loss_train = loss(predict(result.state, train_data.x, train_data.t), train_data.y,
                              train_data.t, cfg.alpha, cfg.loss_kind);
        if (test.n() > 0) {
            out.ate_test = estimate_ate(result.state, test.x);
            out.loss_test = loss(predict(result.state, test.x, test.t), test.y, test.t, cfg.alpha,
                                 cfg.loss_kind);
        }
        if (!std::isfinite(out.ate_train) || !std::isfinite(out.ate_test) ||
            !std::isfinite(out.loss_train) || !std::isfinite(out.loss_test)) {
            throw NumericalError("fit produced a non-finite estimate");
        }
        if (primary) out.model = std::move(result);
        return out;
    };
}

double spread(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return sample_std(values);
}

std::vector<std::size_t> resample_rows(const Dataset& data, RngStream& rng) {
    const std::size_t n = data.n();
    if (n == 0) throw InvalidArgument("resample_rows: empty dataset");
    std::vector<std::size_t> rows(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::size_t treated = 0;
        for (auto& r : rows) {
            r = static_cast<std::size_t>(rng.below(n));
            treated += data.t[r] == 1.0;
        }
        if (treated > 0 && treated < n) return rows;
    }
    throw DataError("bootstrap: resample had a single treatment arm 100 times");
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& task) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    std::vector<std::exception_ptr> errors(count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count && !failed; i = next++) {
                    try {
                        task(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

BootstrapResult bootstrap(const Dataset& train, const Fitter& fit, std::size_t B,
                          std::uint64_t seed, std::size_t workers) {
    train.validate();
    if (!train.has_both_arms()) throw DataError("bootstrap: training data has a single arm");

    BootstrapResult out;
    out.point = fit(train, derive_seed(seed, "fit", 0), true);
    out.replicates.resize(B);
    parallel_for(B, workers, [&](std::size_t b) {
        RngStream rng(derive_seed(seed, "bootstrap-resample", b));
        const auto rows = resample_rows(train, rng);
        out.replicates[b] = fit(train.subset(rows), derive_seed(seed, "bootstrap-fit", b), false);
        out.replicates[b].model.reset();
    });

    AteReport& r = out.report;
    r.ate_train = out.point.ate_train;
    r.ate_test = out.point.ate_test;
    r.loss_train = out.point.loss_train;
    r.loss_test = out.point.loss_test;
    r.n_bootstrap = B;
    if (B >= 2) {
        auto collect = [&](double FitOutcome::*field) {
            std::vector<double> v;
            for (const auto& f : out.replicates) v.push_back(f.*field);
            return spread(std::move(v));
        };
        r.std_train = collect(&FitOutcome::ate_train);
        r.std_test = collect(&FitOutcome::ate_test);
        r.loss_std_train = collect(&FitOutcome::loss_train);
        r.loss_std_test = collect(&FitOutcome::loss_test);
    }
    return out;
}

AteReport bootstrap_std(const Dataset& train, const Dataset& test, const SbnetArchitecture& arch,
                        const TrainConfig& config, std::size_t B, std::uint64_t seed,
                        std::size_t workers) {
    if (B < 2) throw InvalidArgument("bootstrap_std: need at least 2 resamples");
    return bootstrap(train, make_sbnet_fitter(arch, config, test), B, seed, workers).report;
}

}  // namespace sbnet
