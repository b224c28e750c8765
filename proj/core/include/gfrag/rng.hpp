#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace gfrag {

/// Philox4x32-10 block function (Salmon et al., Random123).
/// Stateless: maps a 128-bit counter and a 64-bit key to 128 random bits.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept;
};

/// Purpose tags for stream derivation. Streams with different tags are
/// independent even under the same master seed and replicate index.
enum class StreamTag : std::uint32_t {
    population = 1,
    tagged_path = 2,
    hitting = 3,
    spine = 4,
    malthus = 5,
    harmonic = 6,
    profile = 7,
    frozen = 8,
    stopped_path = 9,
    martingale = 10,
    strong_malthus = 11,
    tightness = 12,
    tightness_spine = 13,
    validation = 14,
    dump = 15,
};

/// Counter-based random stream keyed by (master seed, tag, replicate).
///
/// Every replicate of every Monte Carlo job owns its own stream, so results
/// do not depend on how replicates are scheduled across workers.
class RandomStream {
public:
    using result_type = std::uint32_t;

    RandomStream(std::uint64_t seed, StreamTag tag, std::uint64_t replicate) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform on the open interval (0,1), 53 bits of resolution.
    double uniform() noexcept;
    /// Exponential with the given rate; +inf when rate is 0.
    double exponential(double rate) noexcept;

    std::uint64_t blocks_consumed() const noexcept { return block_index_; }

private:
    void refill() noexcept;

    Philox4x32::Key key_{};
    std::uint64_t replicate_ = 0;
    std::uint64_t block_index_ = 0;
    Philox4x32::Counter buffer_{};
    unsigned next_ = 4;
};

/// 64-bit finalizer from SplitMix64, used for key derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace gfrag
