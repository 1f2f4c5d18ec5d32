#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sbnet/ate.hpp"
#include "sbnet/dataset.hpp"
#include "sbnet/model.hpp"
#include "sbnet/simgen.hpp"

namespace sbnet {

enum class RealDataKind { ihdp, college };
std::string_view to_string(RealDataKind kind) noexcept;
RealDataKind parse_real_data_kind(std::string_view name);

/// Every knob of an experiment. Defaults follow the reference protocol
/// except replications/bootstrap, which are desk-scale (20/20 instead of
/// 100/50).
struct ExperimentConfig {
    SimCase sim_case = SimCase::case1;
    std::size_t n = 1000;
    std::size_t replications = 20;
    std::size_t bootstrap = 20;
    double train_frac = 0.8;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    TrainConfig train;
    /// Set when the loss was chosen explicitly; otherwise IHDP runs use mae.
    bool loss_explicit = false;

    std::vector<std::size_t> balancing_hidden = {128};
    std::vector<std::size_t> outcome_hidden = {128};
    Activation outcome_activation = Activation::silu;
    Activation balancing_activation = Activation::silu;
    /// Second balancing net used when dpp is on.
    Activation dpp_activation = Activation::gelu;
    bool dpp = false;

    NoiseConfig noise;
    /// Unset: off for simulations, on for real data.
    std::optional<bool> standardize;

    std::vector<Activation> balancing_activations() const;
    SbnetArchitecture architecture(std::size_t k) const;
    SbnetArchitecture architecture(std::size_t k, std::vector<Activation> balancing) const;
    void validate() const;
};

/// Sets one field from its flag name (`lr`, `batch-size`, `dpp`, ...).
/// Throws InvalidArgument for unknown keys and unparsable values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` lines; `#` starts a comment.
void load_config(ExperimentConfig& config, std::istream& in, const std::string& what = "config");
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Every setting as (key, value) text, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

/// Keys accepted by apply_setting.
const std::vector<std::string>& setting_keys();

using ProgressFn = std::function<void(const std::string&)>;

struct ReplicationResult {
    std::size_t index = 0;
    std::uint64_t data_seed = 0;
    AteReport report;
    double bias_train = 0.0;
    double bias_test = 0.0;
    TrainTrace trace;  // of the non-resampled fit
};

struct BiasTableRow {
    std::string method;
    std::string case_label;
    std::size_t replications = 0;
    std::size_t bootstrap = 0;
    double bias_train = 0.0;  // mean over replications of (ate - true ate)
    double bias_test = 0.0;
    std::optional<double> std_train;  // mean bootstrap std over replications
    std::optional<double> std_test;
    double mean_abs_bias_test = 0.0;
    double loss_train = 0.0;  // mean factual loss over replications
    double loss_test = 0.0;
    std::optional<double> loss_std_train;
    std::optional<double> loss_std_test;
};

struct VariantRun {
    BiasTableRow row;
    std::vector<ReplicationResult> replications;
};

/// One Sbnet variant: a label and the activation of each balancing net.
struct Variant {
    std::string label;
    std::vector<Activation> balancing;
};

/// R replications of `variants` on the same simulated datasets: fresh data
/// per replication (seeds derived from the master seed and the replication
/// index), an 80/20 split, a fit per variant with bootstrap refits when
/// B >= 2. A failing replication aborts with its index in the message.
std::vector<VariantRun> run_variants(const ExperimentConfig& config,
                                     const std::vector<Variant>& variants,
                                     const ProgressFn& progress = {});

/// Single-net (or DPP, when config.dpp) Sbnet on config.sim_case.
VariantRun run_replications(const ExperimentConfig& config, const ProgressFn& progress = {});

/// "Sbnet" and "Sbnet-DPP" fitted to identical datasets.
std::pair<VariantRun, VariantRun> run_dpp_comparison(const ExperimentConfig& config,
                                                     const ProgressFn& progress = {});

/// Seeds used for replication `r`.
std::uint64_t replication_data_seed(std::uint64_t master, std::size_t r);
std::uint64_t replication_split_seed(std::uint64_t master, std::size_t r);
std::uint64_t replication_fit_seed(std::uint64_t master, std::size_t r);

struct RealRunResult {
    AteReport report;
    std::optional<double> true_ate;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t k = 0;
    LossKind loss_kind = LossKind::mse;
    bool standardized = false;
    TrainResult fit;
    std::vector<std::string> ignored_columns;
};

Dataset load_real(const std::filesystem::path& path, RealDataKind kind,
                  std::vector<std::string>* ignored = nullptr);

/// Split, optionally standardize, fit with bootstrap. IHDP defaults to the
/// mae loss unless the config chose one explicitly.
RealRunResult run_real(const std::filesystem::path& path, RealDataKind kind,
                       const ExperimentConfig& config, const ProgressFn& progress = {});

/// Writes `loss.csv` (epoch,train_loss,val_loss) and `wdist.csv`
/// (epoch,net_index,distance,kind) into `out_dir`, creating it if needed.
void export_figure_data(const TrainTrace& trace, const std::filesystem::path& out_dir);

void write_loss_csv(std::ostream& out, const TrainTrace& trace);

/// Headers documented in the README.
void write_bias_table_csv(std::ostream& out, const std::vector<BiasTableRow>& rows);
void write_replications_csv(std::ostream& out, const std::string& method,
                            const std::vector<ReplicationResult>& reps);
void write_ate_report_csv(std::ostream& out, const AteReport& report,
                          std::optional<double> true_ate);

struct TraceSummary {
    std::size_t net_index = 0;
    DistanceKind kind = DistanceKind::wasserstein1;
    std::size_t points = 0;
    ConvergenceVerdict verdict;
};

/// Reads `wdist.csv` from `trace_dir` and assesses every net.
std::vector<TraceSummary> diagnose_trace_dir(const std::filesystem::path& trace_dir,
                                             double window_frac = 0.1);
void write_trace_summary_csv(std::ostream& out, const std::vector<TraceSummary>& rows);

}  // namespace sbnet
