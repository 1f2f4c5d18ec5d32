#include "activation_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace sbnet::kernels {

void silu(std::size_t n, const double* __restrict z, double* __restrict out,
          double* __restrict slope) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        // Clamped so exp() never overflows; the logistic is saturated there.
        const double zc = std::clamp(z[i], -700.0, 700.0);
        const double s = 1.0 / (1.0 + std::exp(-zc));
        out[i] = z[i] * s;
        slope[i] = s * (1.0 + z[i] * (1.0 - s));
    }
}

void gelu(std::size_t n, const double* __restrict z, double* __restrict out,
          double* __restrict slope) noexcept {
    constexpr double inv_sqrt2 = 0.7071067811865476;
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < n; ++i) {
        const double zc = std::clamp(z[i], -40.0, 40.0);
        const double cdf = 0.5 * std::erfc(-zc * inv_sqrt2);
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * zc * zc);
        out[i] = z[i] * cdf;
        slope[i] = cdf + z[i] * pdf;
    }
}

}  // namespace sbnet::kernels
