#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace sbnet {

enum class DistanceKind { wasserstein1, symmetric_kl };

std::string_view to_string(DistanceKind kind) noexcept;
DistanceKind parse_distance_kind(std::string_view name);

inline constexpr std::size_t kDefaultKlBins = 32;

/// Exact 1-D Wasserstein-1 distance between two equal-size empirical
/// samples: mean absolute difference of the sorted values.
double wasserstein1(std::span<const double> u, std::span<const double> v);

/// Symmetric KL divergence KL(p||q) + KL(q||p) between equal-width
/// histograms of u and v on their common range, with add-one smoothing.
/// Returns 0 when every value in u and v is identical.
double symmetric_kl(std::span<const double> u, std::span<const double> v,
                    std::size_t bins = kDefaultKlBins);

double sample_distance(DistanceKind kind, std::span<const double> u, std::span<const double> v);

struct ConvergencePoint {
    std::size_t epoch;  // 1-based; the first point is epoch 2
    double distance;
};

/// Distances between consecutive pseudo-propensity snapshots, one series per
/// balancing net.
struct ConvergenceTrace {
    DistanceKind kind = DistanceKind::wasserstein1;
    std::vector<std::vector<ConvergencePoint>> series;

    std::size_t net_count() const noexcept { return series.size(); }
    /// Distances of one net in epoch order.
    std::vector<double> distances(std::size_t net) const;
};

/// snapshots[epoch][net] is the pseudo-propensity vector of `net` after
/// epoch `epoch + 1`. Needs at least two epochs.
ConvergenceTrace build_convergence_trace(
    const std::vector<std::vector<std::vector<double>>>& snapshots, DistanceKind kind);

struct ConvergenceVerdict {
    bool converged = false;
    double head_mean = 0.0;
    double tail_mean = 0.0;
};

/// Compares the mean of the first and last ceil(window_frac * len)
/// distances; converged iff the tail mean is strictly below the head mean.
ConvergenceVerdict assess_convergence(std::span<const double> distances,
                                      double window_frac = 0.1);
std::vector<ConvergenceVerdict> assess_convergence(const ConvergenceTrace& trace,
                                                   double window_frac = 0.1);

/// CSV with header `epoch,net_index,distance,kind`; net_index is 0-based.
void write_trace_csv(std::ostream& out, const ConvergenceTrace& trace);
ConvergenceTrace read_trace_csv(std::istream& in);

}  // namespace sbnet
