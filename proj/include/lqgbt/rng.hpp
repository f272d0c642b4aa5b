#pragma once

#include <array>
#include <cstdint>

namespace lqgbt {

/// Philox4x32-10 counter-based generator. Each (seed, stream, index) triple
/// addresses an independent deterministic sequence, so parallel path
/// simulation needs no shared RNG state.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

    /// Next standard normal deviate (Box-Muller on counter-indexed uniforms).
    double normal();

private:
    std::array<std::uint32_t, 4> block(std::uint64_t counter) const;
    std::uint32_t key0_, key1_;
    std::uint64_t index_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace lqgbt
