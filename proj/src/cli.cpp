#include "sbnet/cli.hpp"

#include "sbnet/data_io.hpp"
#include "sbnet/errors.hpp"
#include "sbnet/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef SBNET_VERSION
#define SBNET_VERSION "0.0.0"
#endif

namespace sbnet {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::map<std::string, std::string>& setting_help() {
    static const std::map<std::string, std::string> help = {
        {"case", "simulation case: 1, 2 or 3"},
        {"n", "units per simulated dataset"},
        {"replications", "number of simulated replications"},
        {"bootstrap", "bootstrap refits per estimate (0 or 1 disables)"},
        {"train-frac", "fraction of rows used for training"},
        {"seed", "master seed"},
        {"workers", "worker threads for replications/bootstrap"},
        {"epochs", "maximum training epochs"},
        {"batch-size", "mini-batch size"},
        {"lr", "learning rate"},
        {"alpha", "weight of the treated-arm loss, in (0, 1)"},
        {"loss", "mse or mae"},
        {"patience", "early-stopping patience in epochs"},
        {"min-delta", "minimum validation improvement"},
        {"val-frac", "validation fraction of the training rows"},
        {"optimizer", "sgd or adam"},
        {"restore-best", "return the best-validation parameters"},
        {"distance", "wasserstein1 or symmetric_kl"},
        {"balancing-hidden", "comma-separated hidden sizes of each balancing net"},
        {"outcome-hidden", "comma-separated hidden sizes of the outcome net"},
        {"outcome-activation", "silu, gelu or identity"},
        {"balancing-activation", "activation of the first balancing net"},
        {"dpp-activation", "activation of the second balancing net"},
        {"dpp", "two balancing nets (benchmark: compare single vs two)"},
        {"noise-outcome", "outcome noise level"},
        {"noise-case1", "case 1 treatment noise level"},
        {"noise-case23", "case 2/3 treatment noise level"},
        {"noise-is-std", "read noise levels as standard deviations, not variances"},
        {"standardize", "true, false or auto (off for simulations, on for real data)"},
    };
    return help;
}

bool is_flag_setting(const std::string& key) {
    return key == "dpp" || key == "restore-best" || key == "noise-is-std";
}

// Settings shared by every subcommand: a config file, --full-protocol and
// one option per setting key.
struct SettingOptions {
    std::string config_path;
    bool full_protocol = false;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "key = value settings file (flags override it)")
            ->check(CLI::ExistingFile);
        app.add_flag("--full-protocol", full_protocol,
                     "100 replications and 50 bootstrap refits (unless given explicitly)");
        for (const auto& key : setting_keys()) {
            const auto& help = setting_help().at(key);
            if (is_flag_setting(key)) {
                flags[key] = false;
                options[key] = app.add_flag("--" + key, flags[key], help);
            } else {
                values[key];
                options[key] = app.add_option("--" + key, values[key], help);
            }
        }
    }

    ExperimentConfig resolve(ExperimentConfig config) const {
        if (!config_path.empty()) load_config_file(config, config_path);
        if (full_protocol) {
            config.replications = 100;
            config.bootstrap = 50;
        }
        for (const auto& [key, opt] : options) {
            if (opt->count() == 0) continue;
            apply_setting(config, key, is_flag_setting(key) ? "true" : values.at(key));
        }
        config.validate();
        return config;
    }
};

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json config_json(const ExperimentConfig& config) {
    json j = json::object();
    for (const auto& [k, v] : config_entries(config)) j[k] = v;
    return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& config,
                    json seeds, const std::vector<std::string>& outputs,
                    std::chrono::steady_clock::time_point start, json extra = json::object()) {
    json m;
    m["command"] = command;
    m["started_at"] = utc_now();
    m["versions"] = {{"sbnet", SBNET_VERSION}, {"compiler", __VERSION__},
                     {"cplusplus", static_cast<long>(__cplusplus)}};
    m["config"] = config_json(config);
    m["seeds"] = std::move(seeds);
    m["outputs"] = outputs;
    for (auto& [k, v] : extra.items()) m[k] = v;
    m["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream f(dir / "manifest.json");
    if (!f) throw DataError("cannot write '" + (dir / "manifest.json").string() + "'");
    f << m.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw DataError("cannot create directory '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    return f;
}

enum class DataKind { sim, ihdp, college };

DataKind parse_data_kind(const std::string& s) {
    if (s == "sim") return DataKind::sim;
    if (s == "ihdp") return DataKind::ihdp;
    if (s == "college") return DataKind::college;
    throw InvalidArgument("unknown --kind '" + s + "' (expected sim, ihdp or college)");
}

Dataset load_any(const fs::path& path, DataKind kind, std::ostream& err) {
    switch (kind) {
        case DataKind::sim: return load_dataset_csv(path);
        case DataKind::ihdp: return load_ihdp(path);
        case DataKind::college: {
            std::vector<std::string> ignored;
            Dataset d = load_college(path, &ignored);
            if (!ignored.empty()) {
                err << "warning: ignoring " << ignored.size() << " extra column(s):";
                for (const auto& c : ignored) err << ' ' << c;
                err << '\n';
            }
            return d;
        }
    }
    throw InvalidArgument("unknown data kind");
}

void write_transform(const fs::path& path, const Standardizer& s) {
    auto f = open_out(path);
    f << "column,mean,scale\n";
    char buf[96];
    for (std::size_t j = 0; j < s.mean.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", j, s.mean[j], s.scale[j]);
        f << buf;
    }
}

Standardizer read_transform(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    const CsvTable t = read_csv(in, path.string());
    const auto mc = t.find("mean");
    const auto sc = t.find("scale");
    if (mc == CsvTable::npos || sc == CsvTable::npos)
        throw DataError(path.string() + ": expected columns mean and scale");
    Standardizer s;
    for (const auto& row : t.rows) {
        s.mean.push_back(row[mc]);
        s.scale.push_back(row[sc]);
    }
    return s;
}

ProgressFn make_progress(std::ostream& err, bool quiet) {
    if (quiet) return {};
    return [&err](const std::string& msg) { err << msg << '\n' << std::flush; };
}

// ---------------------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& config, const std::string& out_path, std::ostream& out) {
    const Dataset d = gen_dataset(config.sim_case, config.n, config.seed, config.noise);
    if (out_path.empty() || out_path == "-") {
        write_dataset_csv(out, d);
    } else {
        save_dataset_csv(out_path, d);
    }
    return kExitOk;
}

int cmd_train(const ExperimentConfig& config, const fs::path& data_path, DataKind kind,
              const fs::path& out_dir, std::ostream& out, std::ostream& err, bool quiet) {
    const auto start = std::chrono::steady_clock::now();
    const Dataset data = load_any(data_path, kind, err);
    ensure_dir(out_dir);
    const std::uint64_t split_seed = derive_seed(config.seed, "train-split", 0);
    SplitDataset parts = split(data, config.train_frac, split_seed);
    const bool standardized = config.standardize.value_or(kind != DataKind::sim);
    std::vector<std::string> outputs = {"model.sbnet", "loss.csv", "wdist.csv", "ate.csv"};
    if (standardized) {
        auto s = standardize(parts.train, parts.test);
        parts.train = std::move(s.train);
        parts.test = std::move(s.test);
        write_transform(out_dir / "transform.csv", s.transform);
        outputs.push_back("transform.csv");
    }
    TrainConfig tc = config.train;
    if (kind == DataKind::ihdp && !config.loss_explicit) tc.loss_kind = LossKind::mae;

    const std::size_t B = config.bootstrap >= 2 ? config.bootstrap : 0;
    const std::uint64_t fit_seed = derive_seed(config.seed, "train-fit", 0);
    auto fitter = make_sbnet_fitter(config.architecture(data.k()), tc, parts.test);
    if (!quiet) err << "training on " << parts.train.n() << " rows, " << B << " bootstrap refits\n";
    auto boot = bootstrap(parts.train, fitter, B, fit_seed, config.workers);
    const TrainResult& fit = *boot.point.model;

    {
        auto f = open_out(out_dir / "model.sbnet");
        save_state(f, fit.state);
    }
    export_figure_data(fit.trace, out_dir);
    {
        auto f = open_out(out_dir / "ate.csv");
        write_ate_report_csv(f, boot.report, data.true_ate);
    }
    write_ate_report_csv(out, boot.report, data.true_ate);
    write_manifest(out_dir, "train", config,
                   {{"master", config.seed}, {"split", split_seed}, {"fit", fit_seed}}, outputs,
                   start,
                   {{"data", data_path.string()},
                    {"loss", std::string(to_string(tc.loss_kind))},
                    {"standardized", standardized},
                    {"epochs_run", fit.trace.epochs_run()},
                    {"early_stopped", fit.trace.early_stopped}});
    return kExitOk;
}

int cmd_estimate(const fs::path& model_path, const fs::path& data_path, DataKind kind,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
    fs::path state_file = model_path;
    std::optional<Standardizer> transform;
    if (fs::is_directory(model_path)) {
        state_file = model_path / "model.sbnet";
        if (fs::exists(model_path / "transform.csv"))
            transform = read_transform(model_path / "transform.csv");
    }
    std::ifstream in(state_file);
    if (!in) throw DataError("cannot open model '" + state_file.string() + "'");
    const SbnetState state = load_state(in);
    Dataset data = load_any(data_path, kind, err);
    if (transform) data.x = transform->apply(data.x);
    if (data.k() != state.arch.k) {
        throw DataError("data has " + std::to_string(data.k()) + " covariates, model expects " +
                        std::to_string(state.arch.k));
    }
    const double ate = estimate_ate(state, data.x);
    auto emit = [&](std::ostream& o) {
        char buf[64];
        o << "n,ate,true_ate,bias\n" << data.n() << ',';
        std::snprintf(buf, sizeof buf, "%.17g", ate);
        o << buf << ',';
        if (data.true_ate) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", *data.true_ate, ate - *data.true_ate);
            o << buf;
        } else {
            o << ',';
        }
        o << '\n';
    };
    emit(out);
    if (!out_path.empty()) {
        auto f = open_out(out_path);
        emit(f);
    }
    return kExitOk;
}

int cmd_benchmark(const ExperimentConfig& config, const fs::path& out_dir,
                  const std::string& real_kind, const fs::path& data_path, std::ostream& out,
                  std::ostream& err, bool quiet) {
    const auto start = std::chrono::steady_clock::now();
    ensure_dir(out_dir);
    const auto progress = make_progress(err, quiet);

    if (!real_kind.empty()) {
        if (data_path.empty()) throw InvalidArgument("benchmark --real needs --data");
        const RealDataKind kind = parse_real_data_kind(real_kind);
        const RealRunResult r = run_real(data_path, kind, config, progress);
        {
            auto f = open_out(out_dir / "ate.csv");
            write_ate_report_csv(f, r.report, r.true_ate);
        }
        export_figure_data(r.fit.trace, out_dir);
        write_ate_report_csv(out, r.report, r.true_ate);
        write_manifest(out_dir, "benchmark", config,
                       {{"master", config.seed},
                        {"split", derive_seed(config.seed, "real-split", 0)},
                        {"fit", derive_seed(config.seed, "real-fit", 0)}},
                       {"ate.csv", "loss.csv", "wdist.csv"}, start,
                       {{"data", data_path.string()},
                        {"kind", std::string(to_string(kind))},
                        {"loss", std::string(to_string(r.loss_kind))},
                        {"standardized", r.standardized},
                        {"n_train", r.n_train},
                        {"n_test", r.n_test}});
        return kExitOk;
    }

    std::vector<VariantRun> runs;
    if (config.dpp) {
        auto [single, dpp] = run_dpp_comparison(config, progress);
        runs.push_back(std::move(single));
        runs.push_back(std::move(dpp));
    } else {
        runs.push_back(run_replications(config, progress));
    }

    std::vector<BiasTableRow> rows;
    std::vector<std::string> outputs = {"bias_table.csv", "replications.csv"};
    for (const auto& run : runs) rows.push_back(run.row);
    {
        auto f = open_out(out_dir / "bias_table.csv");
        write_bias_table_csv(f, rows);
    }
    {
        auto f = open_out(out_dir / "replications.csv");
        bool first = true;
        for (const auto& run : runs) {
            std::ostringstream part;
            write_replications_csv(part, run.row.method, run.replications);
            std::string text = part.str();
            if (!first) text.erase(0, text.find('\n') + 1);
            f << text;
            first = false;
        }
    }
    // Figure data for the first replication of each variant.
    for (const auto& run : runs) {
        const fs::path dir = out_dir / "figures" / run.row.method;
        export_figure_data(run.replications.front().trace, dir);
        outputs.push_back((fs::path("figures") / run.row.method / "loss.csv").string());
        outputs.push_back((fs::path("figures") / run.row.method / "wdist.csv").string());
    }
    write_bias_table_csv(out, rows);

    json data_seeds = json::array();
    for (std::size_t r = 0; r < config.replications; ++r)
        data_seeds.push_back(replication_data_seed(config.seed, r));
    write_manifest(out_dir, "benchmark", config,
                   {{"master", config.seed}, {"replication_data", std::move(data_seeds)}},
                   outputs, start);
    return kExitOk;
}

int cmd_diagnose(const fs::path& trace_dir, const std::string& out_path, double window,
                 std::ostream& out) {
    const auto rows = diagnose_trace_dir(trace_dir, window);
    write_trace_summary_csv(out, rows);
    if (!out_path.empty()) {
        auto f = open_out(out_path);
        write_trace_summary_csv(f, rows);
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-balancing neural network: training, ATE estimation and benchmarks",
                 "sbnet"};
    app.require_subcommand(1);
    app.fallthrough();  // lets -q follow the subcommand
    app.set_version_flag("--version", SBNET_VERSION);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress messages");

    auto* simulate = app.add_subcommand("simulate", "write one simulated dataset as CSV");
    auto* train = app.add_subcommand("train", "fit a model and export its traces");
    auto* estimate = app.add_subcommand("estimate", "ATE of a saved model on a dataset");
    auto* benchmark = app.add_subcommand("benchmark", "replicated bias tables or real-data runs");
    auto* diagnose = app.add_subcommand("diagnose", "convergence verdicts from a trace directory");

    SettingOptions sim_s, train_s, bench_s;
    sim_s.attach(*simulate);
    train_s.attach(*train);
    bench_s.attach(*benchmark);

    std::string sim_out = "-";
    simulate->add_option("--out", sim_out, "output CSV path ('-' for stdout)");

    std::string train_data, train_kind = "sim", train_out;
    train->add_option("--data", train_data, "input CSV")->required();
    train->add_option("--kind", train_kind, "sim, ihdp or college");
    train->add_option("--out", train_out, "output directory")->required();

    std::string est_model, est_data, est_kind = "sim", est_out;
    estimate->add_option("--model", est_model, "model file or train output directory")->required();
    estimate->add_option("--data", est_data, "input CSV")->required();
    estimate->add_option("--kind", est_kind, "sim, ihdp or college");
    estimate->add_option("--out", est_out, "also write the result to this file");

    std::string bench_out, bench_real, bench_data;
    benchmark->add_option("--out", bench_out, "output directory")->required();
    benchmark->add_option("--real", bench_real, "ihdp or college: run on a real dataset");
    benchmark->add_option("--data", bench_data, "real dataset CSV (with --real)");

    std::string diag_dir, diag_out;
    double diag_window = 0.1;
    diagnose->add_option("--trace-dir", diag_dir, "directory holding wdist.csv")->required();
    diagnose->add_option("--out", diag_out, "also write the summary to this file");
    diagnose->add_option("--window", diag_window, "head/tail window fraction");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim_s.resolve({}), sim_out, out);
        if (train->parsed()) {
            ExperimentConfig defaults;
            defaults.bootstrap = 0;
            return cmd_train(train_s.resolve(defaults), train_data, parse_data_kind(train_kind),
                             train_out, out, err, quiet);
        }
        if (estimate->parsed())
            return cmd_estimate(est_model, est_data, parse_data_kind(est_kind), est_out, out, err);
        if (benchmark->parsed())
            return cmd_benchmark(bench_s.resolve({}), bench_out, bench_real, bench_data, out, err,
                                 quiet);
        if (diagnose->parsed()) return cmd_diagnose(diag_dir, diag_out, diag_window, out);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const DimensionError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace sbnet
