#include "sbnet/diagnostics.hpp"

#include "sbnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace sbnet {

std::string_view to_string(DistanceKind kind) noexcept {
    return kind == DistanceKind::wasserstein1 ? "wasserstein1" : "symmetric_kl";
}

DistanceKind parse_distance_kind(std::string_view name) {
    if (name == "wasserstein1" || name == "wasserstein" || name == "w1")
        return DistanceKind::wasserstein1;
    if (name == "symmetric_kl" || name == "kl") return DistanceKind::symmetric_kl;
    throw InvalidArgument("unknown distance kind '" + std::string(name) + "'");
}

double wasserstein1(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionError("wasserstein1: sample sizes differ (" + std::to_string(u.size()) +
                             " vs " + std::to_string(v.size()) + ")");
    }
    if (u.empty()) throw InvalidArgument("wasserstein1: empty samples");
    std::vector<double> a(u.begin(), u.end());
    std::vector<double> b(v.begin(), v.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double symmetric_kl(std::span<const double> u, std::span<const double> v, std::size_t bins) {
    if (bins < 2) throw InvalidArgument("symmetric_kl: need at least 2 bins");
    if (u.empty() || v.empty()) throw InvalidArgument("symmetric_kl: empty samples");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto s : {u, v})
        for (double x : s) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (!(hi > lo)) return 0.0;

    auto histogram = [&](std::span<const double> s) {
        std::vector<double> h(bins, 1.0);  // add-one smoothing
        const double width = (hi - lo) / static_cast<double>(bins);
        for (double x : s) {
            auto b = static_cast<std::size_t>((x - lo) / width);
            h[std::min(b, bins - 1)] += 1.0;
        }
        const double total = static_cast<double>(s.size() + bins);
        for (double& c : h) c /= total;
        return h;
    };
    const auto p = histogram(u);
    const auto q = histogram(v);
    double d = 0.0;
    for (std::size_t i = 0; i < bins; ++i) d += (p[i] - q[i]) * std::log(p[i] / q[i]);
    return d;
}

double sample_distance(DistanceKind kind, std::span<const double> u, std::span<const double> v) {
    return kind == DistanceKind::wasserstein1 ? wasserstein1(u, v) : symmetric_kl(u, v);
}

std::vector<double> ConvergenceTrace::distances(std::size_t net) const {
    std::vector<double> out;
    out.reserve(series.at(net).size());
    for (const auto& p : series.at(net)) out.push_back(p.distance);
    return out;
}

ConvergenceTrace build_convergence_trace(
    const std::vector<std::vector<std::vector<double>>>& snapshots, DistanceKind kind) {
    if (snapshots.size() < 2) {
        throw InvalidArgument("build_convergence_trace: need at least 2 snapshots, got " +
                              std::to_string(snapshots.size()));
    }
    const std::size_t nets = snapshots.front().size();
    ConvergenceTrace trace;
    trace.kind = kind;
    trace.series.resize(nets);
    for (std::size_t e = 1; e < snapshots.size(); ++e) {
        if (snapshots[e].size() != nets) {
            throw DimensionError("build_convergence_trace: net count changes between epochs");
        }
        for (std::size_t j = 0; j < nets; ++j) {
            trace.series[j].push_back(
                {e + 1, sample_distance(kind, snapshots[e - 1][j], snapshots[e][j])});
        }
    }
    return trace;
}

ConvergenceVerdict assess_convergence(std::span<const double> distances, double window_frac) {
    if (!(window_frac > 0.0 && window_frac <= 0.5)) {
        throw InvalidArgument("assess_convergence: window_frac must lie in (0, 0.5]");
    }
    const double len = static_cast<double>(distances.size());
    if (len < 2.0 / window_frac) {
        throw InvalidArgument("assess_convergence: trace of length " +
                              std::to_string(distances.size()) + " is too short for window " +
                              std::to_string(window_frac));
    }
    const auto w = static_cast<std::size_t>(std::ceil(window_frac * len));
    ConvergenceVerdict v;
    v.head_mean = 0.0;
    v.tail_mean = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        v.head_mean += distances[i];
        v.tail_mean += distances[distances.size() - w + i];
    }
    v.head_mean /= static_cast<double>(w);
    v.tail_mean /= static_cast<double>(w);
    v.converged = v.tail_mean < v.head_mean;
    return v;
}

std::vector<ConvergenceVerdict> assess_convergence(const ConvergenceTrace& trace,
                                                   double window_frac) {
    std::vector<ConvergenceVerdict> out;
    for (std::size_t j = 0; j < trace.net_count(); ++j)
        out.push_back(assess_convergence(trace.distances(j), window_frac));
    return out;
}

void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace) {
    out << "epoch,net_index,distance,kind\n";
    if (trace.series.empty()) return;
    const auto kind = to_string(trace.kind);
    out << std::setprecision(17);
    // Epoch-major so that rows of one epoch sit together.
    const std::size_t len = trace.series.front().size();
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < trace.series.size(); ++j) {
            const auto& p = trace.series[j].at(i);
            out << p.epoch << ',' << j << ',' << p.distance << ',' << kind << '\n';
        }
}

ConvergenceTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "epoch,net_index,distance,kind") {
        throw DataError("trace csv: expected header 'epoch,net_index,distance,kind'");
    }
    ConvergenceTrace trace;
    bool kind_seen = false;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string epoch, net, dist, kind;
        if (!std::getline(ls, epoch, ',') || !std::getline(ls, net, ',') ||
            !std::getline(ls, dist, ',') || !std::getline(ls, kind)) {
            throw DataError("trace csv: row " + std::to_string(row) + " has fewer than 4 fields");
        }
        try {
            const auto j = static_cast<std::size_t>(std::stoul(net));
            const DistanceKind k = parse_distance_kind(kind);
            if (kind_seen && k != trace.kind) throw DataError("mixed distance kinds");
            trace.kind = k;
            kind_seen = true;
            if (j >= trace.series.size()) trace.series.resize(j + 1);
            trace.series[j].push_back({static_cast<std::size_t>(std::stoul(epoch)), std::stod(dist)});
        } catch (const std::exception& e) {
            throw DataError("trace csv: row " + std::to_string(row) + ": " + e.what());
        }
    }
    return trace;
}

}  // namespace sbnet
