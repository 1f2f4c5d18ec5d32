#include "sbnet/rng.hpp"

#include "sbnet/errors.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace sbnet {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
}

std::uint64_t RngStream::next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("RngStream::below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; 1 - uniform() lies in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::string RngStream::serialize() const {
    std::ostringstream out;
    out << "xoshiro256ss " << seed_;
    for (auto w : s_) out << ' ' << w;
    out << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare_);
    return out.str();
}

RngStream RngStream::deserialize(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string tag;
    RngStream rng;
    int spare_flag = 0;
    std::uint64_t spare_bits = 0;
    in >> tag >> rng.seed_;
    for (auto& w : rng.s_) in >> w;
    in >> spare_flag >> spare_bits;
    if (!in || tag != "xoshiro256ss") throw DataError("RngStream: malformed state string");
    rng.has_spare_ = spare_flag != 0;
    rng.spare_ = std::bit_cast<double>(spare_bits);
    return rng;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    // FNV-1a over the tag, then splitmix64 finalisation of each component.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t x = master;
    std::uint64_t out = splitmix64(x);
    x = out ^ h;
    out = splitmix64(x);
    x = out ^ index;
    return splitmix64(x);
}

Matrix gaussian_sample(RngStream& rng, double mean, double std, std::size_t rows,
                       std::size_t cols) {
    if (!(std >= 0.0)) throw InvalidArgument("gaussian_sample: std must be non-negative");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = mean + std * rng.normal();
    return m;
}

std::vector<double> gaussian_vector(RngStream& rng, double mean, double std, std::size_t n) {
    return gaussian_sample(rng, mean, std, n, 1).data();
}

}  // namespace sbnet
