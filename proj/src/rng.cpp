#include "lqgbt/rng.hpp"

#include <cmath>
#include <numbers>

namespace lqgbt {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

Philox::Philox(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) : index_(index) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(stream));
    key0_ = static_cast<std::uint32_t>(k);
    key1_ = static_cast<std::uint32_t>(k >> 32);
}

std::array<std::uint32_t, 4> Philox::block(std::uint64_t counter) const {
    std::array<std::uint32_t, 4> c = {static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
                                      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return c;
}

double Philox::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const auto w = block(counter_++);
    const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    double u1 = static_cast<double>(a >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    cached_ = rad * std::sin(ang);
    has_cached_ = true;
    return rad * std::cos(ang);
}

}  // namespace lqgbt
