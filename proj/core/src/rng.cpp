#include "gfrag/rng.hpp"

#include <cmath>

namespace gfrag {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, StreamTag tag, std::uint64_t replicate) noexcept
    : replicate_(replicate) {
    const std::uint64_t k = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

void RandomStream::refill() noexcept {
    const Philox4x32::Counter ctr = {
        static_cast<std::uint32_t>(block_index_), static_cast<std::uint32_t>(block_index_ >> 32),
        static_cast<std::uint32_t>(replicate_), static_cast<std::uint32_t>(replicate_ >> 32)};
    buffer_ = Philox4x32::block(ctr, key_);
    ++block_index_;
    next_ = 0;
}

RandomStream::result_type RandomStream::operator()() noexcept {
    if (next_ == 4) refill();
    return buffer_[next_++];
}

double RandomStream::uniform() noexcept {
    const std::uint64_t a = (*this)() >> 5;
    const std::uint64_t b = (*this)() >> 6;
    const std::uint64_t bits = (a << 26) | b;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::exponential(double rate) noexcept {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log(uniform()) / rate;
}

}  // namespace gfrag
