#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sbnet/linalg.hpp"

namespace sbnet {

/// Seeded xoshiro256** stream with Box-Muller normals.
///
/// Output is bit-identical across platforms for a given seed and call
/// sequence: no std:: distributions are involved. A stream is single-owner;
/// parallel callers derive their own with derive_seed().
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    /// Uniform integer on [0, n). Unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t n);
    double normal() noexcept;

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Full state as text; deserialize() resumes the identical sequence.
    std::string serialize() const;
    static RngStream deserialize(std::string_view text);

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Child seed from (master, role tag, index). Adding indices never perturbs
/// the seeds of earlier ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index);

/// rows x cols matrix of N(mean, std^2) draws. Throws on std < 0.
Matrix gaussian_sample(RngStream& rng, double mean, double std, std::size_t rows,
                       std::size_t cols);

/// Vector of n N(mean, std^2) draws.
std::vector<double> gaussian_vector(RngStream& rng, double mean, double std, std::size_t n);

}  // namespace sbnet
