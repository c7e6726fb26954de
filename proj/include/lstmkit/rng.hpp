#pragma once

#include <cstdint>
#include <vector>

namespace lstmkit {

// Seedable, splittable PCG32 generator (O'Neill's pcg32 with explicit stream
// selection). Identical (seed, stream_id) pairs produce identical sequences on
// every platform; distinct stream_ids select independent sequences. Never falls
// back to the platform default engine.
class Rng {
public:
    Rng() : Rng(0, 0) {}
    Rng(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform in [0,1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);

    // Unbiased integer in [0, bound); bound > 0.
    std::uint32_t below(std::uint32_t bound);

    // Derived generator for an independent substream. Deterministic in
    // (seed, stream_id, id).
    Rng substream(std::uint64_t id) const;

    // In-place Fisher-Yates shuffle of 0..n-1 style index vectors.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Raw pcg32 state, for checkpointing.
    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

// Order-sensitive mixing of stream ids, used to build unique substream ids
// from structured coordinates (epoch, batch, layer, ...).
std::uint64_t mix_streams(std::uint64_t a, std::uint64_t b);

// SplitMix64 finalizer; also usable as a standalone integer hash.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lstmkit
