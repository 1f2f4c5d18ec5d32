#include "sbnet/harness.hpp"

#include "sbnet/data_io.hpp"
#include "sbnet/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

namespace sbnet {

namespace {

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string bad_value(std::string_view key, std::string_view value) {
    return "invalid value '" + std::string(value) + "' for '" + std::string(key) + "'";
}

std::size_t parse_count(std::string_view key, std::string_view value) {
    const std::string s(value);
    char* end = nullptr;
    if (s.empty() || s[0] == '-') throw InvalidArgument(bad_value(key, value));
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) throw InvalidArgument(bad_value(key, value));
    return static_cast<std::size_t>(v);
}

double parse_real(std::string_view key, std::string_view value) {
    const std::string s(value);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw InvalidArgument(bad_value(key, value));
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw InvalidArgument(bad_value(key, value));
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view value) {
    std::vector<std::size_t> out;
    std::string item;
    std::istringstream in{std::string(value)};
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(' ');
        const std::size_t v = parse_count(key, item.substr(b, e - b + 1));
        if (v == 0) throw InvalidArgument(bad_value(key, value));
        out.push_back(v);
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

template <typename Parse>
auto parse_or_invalid(std::string_view key, std::string_view value, Parse parse) {
    try {
        return parse(value);
    } catch (const InvalidArgument&) {
        throw InvalidArgument(bad_value(key, value));
    }
}

// Re-throws the active exception with `context` prefixed, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& context) {
    try {
        throw;
    } catch (const NumericalError& e) {
        throw NumericalError(context + e.what());
    } catch (const DataError& e) {
        throw DataError(context + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(context + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(context + e.what());
    } catch (const std::exception& e) {
        throw Error(context + e.what());
    }
}

BiasTableRow aggregate(const std::string& method, const std::string& case_label,
                       const std::vector<ReplicationResult>& reps, std::size_t bootstrap) {
    BiasTableRow row;
    row.method = method;
    row.case_label = case_label;
    row.replications = reps.size();
    row.bootstrap = bootstrap;
    const double r = static_cast<double>(reps.size());
    bool have_std = !reps.empty();
    double std_train = 0.0, std_test = 0.0, lstd_train = 0.0, lstd_test = 0.0;
    for (const auto& rep : reps) {
        row.bias_train += rep.bias_train / r;
        row.bias_test += rep.bias_test / r;
        row.mean_abs_bias_test += std::abs(rep.bias_test) / r;
        row.loss_train += rep.report.loss_train / r;
        row.loss_test += rep.report.loss_test / r;
        if (!rep.report.std_train) {
            have_std = false;
            continue;
        }
        std_train += *rep.report.std_train / r;
        std_test += *rep.report.std_test / r;
        lstd_train += *rep.report.loss_std_train / r;
        lstd_test += *rep.report.loss_std_test / r;
    }
    if (have_std) {
        row.std_train = std_train;
        row.std_test = std_test;
        row.loss_std_train = lstd_train;
        row.loss_std_test = lstd_test;
    }
    return row;
}

}  // namespace

std::string_view to_string(RealDataKind kind) noexcept {
    return kind == RealDataKind::ihdp ? "ihdp" : "college";
}

RealDataKind parse_real_data_kind(std::string_view name) {
    if (name == "ihdp") return RealDataKind::ihdp;
    if (name == "college") return RealDataKind::college;
    throw InvalidArgument("unknown dataset kind '" + std::string(name) +
                          "' (expected ihdp or college)");
}

std::vector<Activation> ExperimentConfig::balancing_activations() const {
    if (dpp) return {balancing_activation, dpp_activation};
    return {balancing_activation};
}

SbnetArchitecture ExperimentConfig::architecture(std::size_t k) const {
    return architecture(k, balancing_activations());
}

SbnetArchitecture ExperimentConfig::architecture(std::size_t k,
                                                 std::vector<Activation> balancing) const {
    return SbnetArchitecture::make(k, std::move(balancing), balancing_hidden, outcome_hidden,
                                   outcome_activation);
}

void ExperimentConfig::validate() const {
    if (n < 2) throw InvalidArgument("config: n must be at least 2");
    if (replications < 1) throw InvalidArgument("config: replications must be at least 1");
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw InvalidArgument("config: train-frac must lie in (0, 1)");
    if (workers < 1) throw InvalidArgument("config: workers must be at least 1");
    if (noise.outcome < 0.0 || noise.case1 < 0.0 || noise.case23 < 0.0)
        throw InvalidArgument("config: noise levels must be non-negative");
    train.validate();
}

const std::vector<std::string>& setting_keys() {
    static const std::vector<std::string> keys = {
        "case", "n", "replications", "bootstrap", "train-frac", "seed", "workers", "epochs",
        "batch-size", "lr", "alpha", "loss", "patience", "min-delta", "val-frac", "optimizer",
        "restore-best", "distance", "balancing-hidden", "outcome-hidden", "outcome-activation",
        "balancing-activation", "dpp-activation", "dpp", "noise-outcome", "noise-case1",
        "noise-case23", "noise-is-std", "standardize"};
    return keys;
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
    auto& t = c.train;
    if (key == "case") c.sim_case = parse_or_invalid(key, value, parse_sim_case);
    else if (key == "n") c.n = parse_count(key, value);
    else if (key == "replications") c.replications = parse_count(key, value);
    else if (key == "bootstrap") c.bootstrap = parse_count(key, value);
    else if (key == "train-frac") c.train_frac = parse_real(key, value);
    else if (key == "seed") c.seed = parse_count(key, value);
    else if (key == "workers") c.workers = parse_count(key, value);
    else if (key == "epochs") t.epochs = parse_count(key, value);
    else if (key == "batch-size") t.batch_size = parse_count(key, value);
    else if (key == "lr") t.lr = parse_real(key, value);
    else if (key == "alpha") t.alpha = parse_real(key, value);
    else if (key == "loss") {
        t.loss_kind = parse_or_invalid(key, value, parse_loss_kind);
        c.loss_explicit = true;
    } else if (key == "patience") t.patience = parse_count(key, value);
    else if (key == "min-delta") t.min_delta = parse_real(key, value);
    else if (key == "val-frac") t.val_frac = parse_real(key, value);
    else if (key == "optimizer") t.optimizer = parse_or_invalid(key, value, parse_optimizer);
    else if (key == "restore-best") t.restore_best = parse_bool(key, value);
    else if (key == "distance") t.distance = parse_or_invalid(key, value, parse_distance_kind);
    else if (key == "balancing-hidden") c.balancing_hidden = parse_sizes(key, value);
    else if (key == "outcome-hidden") c.outcome_hidden = parse_sizes(key, value);
    else if (key == "outcome-activation")
        c.outcome_activation = parse_or_invalid(key, value, parse_activation);
    else if (key == "balancing-activation")
        c.balancing_activation = parse_or_invalid(key, value, parse_activation);
    else if (key == "dpp-activation")
        c.dpp_activation = parse_or_invalid(key, value, parse_activation);
    else if (key == "dpp") c.dpp = parse_bool(key, value);
    else if (key == "noise-outcome") c.noise.outcome = parse_real(key, value);
    else if (key == "noise-case1") c.noise.case1 = parse_real(key, value);
    else if (key == "noise-case23") c.noise.case23 = parse_real(key, value);
    else if (key == "noise-is-std") c.noise.noise_is_std = parse_bool(key, value);
    else if (key == "standardize") {
        if (value == "auto") c.standardize.reset();
        else c.standardize = parse_bool(key, value);
    }
    else throw InvalidArgument("unknown setting '" + std::string(key) + "'");
}

void load_config(ExperimentConfig& config, std::istream& in, const std::string& what) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument(what + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            apply_setting(config, key, value);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(what + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void load_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file '" + path.string() + "'");
    load_config(config, in, path.string());
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
    const auto& t = c.train;
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"case", std::to_string(case_number(c.sim_case))},
        {"n", std::to_string(c.n)},
        {"replications", std::to_string(c.replications)},
        {"bootstrap", std::to_string(c.bootstrap)},
        {"train-frac", fmt(c.train_frac)},
        {"seed", std::to_string(c.seed)},
        {"workers", std::to_string(c.workers)},
        {"epochs", std::to_string(t.epochs)},
        {"batch-size", std::to_string(t.batch_size)},
        {"lr", fmt(t.lr)},
        {"alpha", fmt(t.alpha)},
        {"loss", std::string(to_string(t.loss_kind))},
        {"patience", std::to_string(t.patience)},
        {"min-delta", fmt(t.min_delta)},
        {"val-frac", fmt(t.val_frac)},
        {"optimizer", std::string(to_string(t.optimizer))},
        {"restore-best", b(t.restore_best)},
        {"distance", std::string(to_string(t.distance))},
        {"balancing-hidden", join_sizes(c.balancing_hidden)},
        {"outcome-hidden", join_sizes(c.outcome_hidden)},
        {"outcome-activation", std::string(to_string(c.outcome_activation))},
        {"balancing-activation", std::string(to_string(c.balancing_activation))},
        {"dpp-activation", std::string(to_string(c.dpp_activation))},
        {"dpp", b(c.dpp)},
        {"noise-outcome", fmt(c.noise.outcome)},
        {"noise-case1", fmt(c.noise.case1)},
        {"noise-case23", fmt(c.noise.case23)},
        {"noise-is-std", b(c.noise.noise_is_std)},
        {"standardize", c.standardize ? b(*c.standardize) : std::string("auto")},
    };
}

std::uint64_t replication_data_seed(std::uint64_t master, std::size_t r) {
    return derive_seed(master, "replication-data", r);
}

std::uint64_t replication_split_seed(std::uint64_t master, std::size_t r) {
    return derive_seed(master, "replication-split", r);
}

std::uint64_t replication_fit_seed(std::uint64_t master, std::size_t r) {
    return derive_seed(master, "replication-fit", r);
}

std::vector<VariantRun> run_variants(const ExperimentConfig& config,
                                     const std::vector<Variant>& variants,
                                     const ProgressFn& progress) {
    config.validate();
    if (variants.empty()) throw InvalidArgument("run_variants: no variants");
    const std::size_t R = config.replications;
    const std::size_t B = config.bootstrap >= 2 ? config.bootstrap : 0;
    std::vector<std::vector<ReplicationResult>> results(variants.size(),
                                                        std::vector<ReplicationResult>(R));
    std::mutex log_mutex;

    parallel_for(R, config.workers, [&](std::size_t r) {
        try {
            const std::uint64_t data_seed = replication_data_seed(config.seed, r);
            const Dataset data = gen_dataset(config.sim_case, config.n, data_seed, config.noise);
            SplitDataset parts = split(data, config.train_frac, replication_split_seed(config.seed, r));
            if (config.standardize.value_or(false)) {
                auto s = standardize(parts.train, parts.test);
                parts.train = std::move(s.train);
                parts.test = std::move(s.test);
            }
            const double truth = *data.true_ate;
            for (std::size_t v = 0; v < variants.size(); ++v) {
                const auto arch = config.architecture(data.k(), variants[v].balancing);
                auto fitter = make_sbnet_fitter(arch, config.train, parts.test);
                auto boot = bootstrap(parts.train, fitter, B, replication_fit_seed(config.seed, r));
                ReplicationResult& out = results[v][r];
                out.index = r;
                out.data_seed = data_seed;
                out.report = boot.report;
                out.bias_train = boot.report.ate_train - truth;
                out.bias_test = boot.report.ate_test - truth;
                out.trace = std::move(boot.point.model->trace);
                if (progress) {
                    std::lock_guard lock(log_mutex);
                    progress(variants[v].label + " replication " + std::to_string(r + 1) + "/" +
                             std::to_string(R) + ": test ATE " + fmt(boot.report.ate_test) +
                             " after " + std::to_string(out.trace.epochs_run()) + " epochs");
                }
            }
        } catch (...) {
            rethrow_with_context("replication " + std::to_string(r) + ": ");
        }
    });

    const std::string case_label = "case " + std::to_string(case_number(config.sim_case));
    std::vector<VariantRun> runs;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        runs.push_back({aggregate(variants[v].label, case_label, results[v], B),
                        std::move(results[v])});
    }
    return runs;
}

VariantRun run_replications(const ExperimentConfig& config, const ProgressFn& progress) {
    const Variant v{config.dpp ? "Sbnet-DPP" : "Sbnet", config.balancing_activations()};
    return std::move(run_variants(config, {v}, progress).front());
}

std::pair<VariantRun, VariantRun> run_dpp_comparison(const ExperimentConfig& config,
                                                     const ProgressFn& progress) {
    auto runs = run_variants(
        config,
        {{"Sbnet", {config.balancing_activation}},
         {"Sbnet-DPP", {config.balancing_activation, config.dpp_activation}}},
        progress);
    return {std::move(runs[0]), std::move(runs[1])};
}

Dataset load_real(const std::filesystem::path& path, RealDataKind kind,
                  std::vector<std::string>* ignored) {
    return kind == RealDataKind::ihdp ? load_ihdp(path) : load_college(path, ignored);
}

RealRunResult run_real(const std::filesystem::path& path, RealDataKind kind,
                       const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    RealRunResult out;
    const Dataset data = load_real(path, kind, &out.ignored_columns);
    if (progress && !out.ignored_columns.empty()) {
        std::string cols;
        for (const auto& c : out.ignored_columns) cols += (cols.empty() ? "" : ", ") + c;
        progress("warning: ignoring columns " + cols);
    }
    out.true_ate = data.true_ate;
    out.k = data.k();

    SplitDataset parts = split(data, config.train_frac, derive_seed(config.seed, "real-split", 0));
    out.standardized = config.standardize.value_or(true);
    if (out.standardized) {
        auto s = standardize(parts.train, parts.test);
        parts.train = std::move(s.train);
        parts.test = std::move(s.test);
    }
    out.n_train = parts.train.n();
    out.n_test = parts.test.n();

    TrainConfig train_cfg = config.train;
    if (kind == RealDataKind::ihdp && !config.loss_explicit) train_cfg.loss_kind = LossKind::mae;
    out.loss_kind = train_cfg.loss_kind;

    const std::size_t B = config.bootstrap >= 2 ? config.bootstrap : 0;
    if (progress) {
        progress("fitting " + std::string(to_string(kind)) + " (n_train " +
                 std::to_string(out.n_train) + ", k " + std::to_string(out.k) + ", " +
                 std::to_string(B) + " bootstrap refits)");
    }
    auto fitter = make_sbnet_fitter(config.architecture(data.k()), train_cfg, parts.test);
    auto boot = bootstrap(parts.train, fitter, B, derive_seed(config.seed, "real-fit", 0),
                          config.workers);
    out.report = boot.report;
    out.fit = std::move(*boot.point.model);
    return out;
}

void write_loss_csv(std::ostream& out, const TrainTrace& trace) {
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < trace.train_loss.size(); ++e)
        out << e + 1 << ',' << fmt(trace.train_loss[e]) << ',' << fmt(trace.val_loss[e]) << '\n';
}

void export_figure_data(const TrainTrace& trace, const std::filesystem::path& out_dir) {
    if (trace.train_loss.empty()) throw InvalidArgument("export_figure_data: empty trace");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    auto open = [&](const char* name) {
        std::ofstream f(out_dir / name);
        if (!f) throw DataError("cannot write '" + (out_dir / name).string() + "'");
        return f;
    };
    auto loss = open("loss.csv");
    write_loss_csv(loss, trace);
    auto wdist = open("wdist.csv");
    write_trace_csv(wdist, trace.convergence);
    if (!loss || !wdist) throw DataError("write failed in '" + out_dir.string() + "'");
}

void write_bias_table_csv(std::ostream& out, const std::vector<BiasTableRow>& rows) {
    out << "method,case,replications,bootstrap,bias_train,std_train,bias_test,std_test,"
           "mean_abs_bias_test,loss_train,loss_std_train,loss_test,loss_std_test\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.case_label << ',' << r.replications << ',' << r.bootstrap
            << ',' << fmt(r.bias_train) << ',' << fmt(r.std_train) << ',' << fmt(r.bias_test)
            << ',' << fmt(r.std_test) << ',' << fmt(r.mean_abs_bias_test) << ','
            << fmt(r.loss_train) << ',' << fmt(r.loss_std_train) << ',' << fmt(r.loss_test)
            << ',' << fmt(r.loss_std_test) << '\n';
    }
}

void write_replications_csv(std::ostream& out, const std::string& method,
                            const std::vector<ReplicationResult>& reps) {
    out << "method,replication,data_seed,ate_train,ate_test,bias_train,bias_test,std_train,"
           "std_test,loss_train,loss_test,epochs,early_stopped\n";
    for (const auto& r : reps) {
        out << method << ',' << r.index << ',' << r.data_seed << ',' << fmt(r.report.ate_train)
            << ',' << fmt(r.report.ate_test) << ',' << fmt(r.bias_train) << ','
            << fmt(r.bias_test) << ',' << fmt(r.report.std_train) << ','
            << fmt(r.report.std_test) << ',' << fmt(r.report.loss_train) << ','
            << fmt(r.report.loss_test) << ',' << r.trace.epochs_run() << ','
            << (r.trace.early_stopped ? 1 : 0) << '\n';
    }
}

void write_ate_report_csv(std::ostream& out, const AteReport& r, std::optional<double> true_ate) {
    out << "ate_train,std_train,ate_test,std_test,n_bootstrap,loss_train,loss_std_train,"
           "loss_test,loss_std_test,true_ate\n";
    out << fmt(r.ate_train) << ',' << fmt(r.std_train) << ',' << fmt(r.ate_test) << ','
        << fmt(r.std_test) << ',' << r.n_bootstrap << ',' << fmt(r.loss_train) << ','
        << fmt(r.loss_std_train) << ',' << fmt(r.loss_test) << ',' << fmt(r.loss_std_test) << ','
        << fmt(true_ate) << '\n';
}

std::vector<TraceSummary> diagnose_trace_dir(const std::filesystem::path& trace_dir,
                                             double window_frac) {
    const auto path = trace_dir / "wdist.csv";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    const ConvergenceTrace trace = read_trace_csv(in);
    std::vector<TraceSummary> out;
    for (std::size_t j = 0; j < trace.net_count(); ++j) {
        const auto d = trace.distances(j);
        out.push_back({j, trace.kind, d.size(), assess_convergence(d, window_frac)});
    }
    return out;
}

void write_trace_summary_csv(std::ostream& out, const std::vector<TraceSummary>& rows) {
    out << "net_index,kind,points,head_mean,tail_mean,converged\n";
    for (const auto& r : rows) {
        out << r.net_index << ',' << to_string(r.kind) << ',' << r.points << ','
            << fmt(r.verdict.head_mean) << ',' << fmt(r.verdict.tail_mean) << ','
            << (r.verdict.converged ? "true" : "false") << '\n';
    }
}

}  // namespace sbnet
