#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sbnet/dataset.hpp"
#include "sbnet/linalg.hpp"
#include "sbnet/model.hpp"

namespace sbnet {

/// mean(f(X, T=1)) - mean(f(X, T=0)).
double estimate_ate(const SbnetState& state, const Matrix& x);

/// Result of fitting one model on one training sample.
struct FitOutcome {
    double ate_train = 0.0;   // on the sample the model was fitted to
    double ate_test = 0.0;    // on the fixed test covariates
    double loss_train = 0.0;  // factual loss on the fitted sample
    double loss_test = 0.0;   // factual loss on the test set
    std::optional<TrainResult> model;  // kept for the primary fit only
};

/// Fits a model to `train` from an initialisation drawn with `seed`.
/// `primary` is true for the fit on the non-resampled data.
using Fitter =
    std::function<FitOutcome(const Dataset& train, std::uint64_t seed, bool primary)>;

/// Trains an Sbnet of shape `arch` (config.seed replaced by the fit seed)
/// and evaluates it on `train` and `test`. An empty `test` yields test
/// fields of 0.
Fitter make_sbnet_fitter(SbnetArchitecture arch, TrainConfig config, Dataset test);

struct AteReport {
    double ate_train = 0.0;
    double ate_test = 0.0;
    std::optional<double> std_train;  // set when n_bootstrap >= 2
    std::optional<double> std_test;
    std::size_t n_bootstrap = 0;
    double loss_train = 0.0;
    double loss_test = 0.0;
    std::optional<double> loss_std_train;
    std::optional<double> loss_std_test;
};

struct BootstrapResult {
    AteReport report;
    FitOutcome point;                   // the non-resampled fit
    std::vector<FitOutcome> replicates;  // in resample order, models dropped
};

/// Sample standard deviation (denominator n - 1) accumulated over the
/// sorted values, so the result does not depend on input order.
double spread(std::vector<double> values);

/// Point estimate from a fit on `train`, plus B refits on resamples drawn
/// with replacement. A resample with a single treatment arm is redrawn (at
/// most 100 times). Every seed derives from `seed`; results do not depend
/// on `workers`.
BootstrapResult bootstrap(const Dataset& train, const Fitter& fit, std::size_t B,
                          std::uint64_t seed, std::size_t workers = 1);

/// Convenience wrapper: Sbnet fits, report only.
AteReport bootstrap_std(const Dataset& train, const Dataset& test, const SbnetArchitecture& arch,
                        const TrainConfig& config, std::size_t B, std::uint64_t seed,
                        std::size_t workers = 1);

/// Rows drawn uniformly with replacement, n of them, containing both arms.
std::vector<std::size_t> resample_rows(const Dataset& data, RngStream& rng);

/// Runs task(i) for i in [0, count) on up to `workers` threads. The first
/// exception by index is rethrown after all threads finish.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& task);

}  // namespace sbnet
