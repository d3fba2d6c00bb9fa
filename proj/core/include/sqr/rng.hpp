#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace sqr {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Output depends only on (key, counter), so per-record substreams are
/// reproducible on every platform regardless of scheduling.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    /// Raw block function: ten rounds over `counter` under `key`.
    static Block generate(Block counter, Key key);

    /// Stream `stream` of generator `seed`. Distinct streams never overlap.
    explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();

private:
    void refill();

    Key key_;
    Block counter_;
    Block buffer_{};
    std::size_t used_ = 4;
};

}  // namespace sqr
