#include "lstmkit/rng.hpp"

namespace lstmkit {

namespace {
constexpr std::uint64_t kPcgMult = 6364136223846793005ULL;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id) {
    // Reference pcg32 initialization: the increment encodes the stream.
    inc_ = (stream_id << 1u) | 1u;
    state_ = 0;
    next_u32();
    state_ += seed;
    next_u32();
}

std::uint32_t Rng::next_u32() {
    std::uint64_t old = state_;
    state_ = old * kPcgMult + inc_;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint64_t Rng::next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Rng::uniform01() {
    std::uint64_t a = next_u32() >> 5;   // 27 bits
    std::uint64_t b = next_u32() >> 6;   // 26 bits
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) *
           (1.0 / 9007199254740992.0);
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

std::uint32_t Rng::below(std::uint32_t bound) {
    // Rejection sampling over the top of the range to avoid modulo bias.
    std::uint32_t threshold = (0u - bound) % bound;
    for (;;) {
        std::uint32_t r = next_u32();
        if (r >= threshold) {
            return r % bound;
        }
    }
}

Rng Rng::substream(std::uint64_t id) const {
    return Rng(seed_, mix_streams(stream_, id));
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_streams(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

}  // namespace lstmkit
