#pragma once

#include <cmath>
#include <cstdint>

namespace recollide::rng {

// FNV-1a, used to derive stream-id salts from human-readable run tags so
// distinct estimator runs under one seed never share a substream.
inline std::uint64_t tag_salt(const char* tag) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char* p = tag; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 1099511628211ull;
    }
    return h;
}

// Counter-based generator: Philox2x64-10 with the published round constants.
// Every output is a pure function of (seed, stream_id, counter), so draws can
// be indexed randomly and work items can own disjoint streams. Schedule and
// thread count never affect the sequence.
struct Philox2x64 {
    static constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ULL;
    static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

    // One 128-bit block: counter block index in c0, stream id in c1.
    static void block(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t block_idx,
                      std::uint64_t& out0, std::uint64_t& out1) {
        std::uint64_t c0 = block_idx, c1 = stream_id, key = seed;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 prod = static_cast<unsigned __int128>(kMul) * c0;
            const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
            const std::uint64_t lo = static_cast<std::uint64_t>(prod);
            c0 = hi ^ key ^ c1;
            c1 = lo;
            key += kWeyl;
        }
        out0 = c0;
        out1 = c1;
    }
};

class Stream {
  public:
    Stream() = default;
    Stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0)
        : seed_(seed), stream_id_(stream_id), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }

    // Draw with an explicit counter (random access); does not advance state.
    std::uint64_t at(std::uint64_t counter) const {
        std::uint64_t o0, o1;
        Philox2x64::block(seed_, stream_id_, counter >> 1, o0, o1);
        return (counter & 1) ? o1 : o0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t idx = counter_++;
        if ((idx >> 1) != cached_block_ || !cache_valid_) {
            Philox2x64::block(seed_, stream_id_, idx >> 1, cache_[0], cache_[1]);
            cached_block_ = idx >> 1;
            cache_valid_ = true;
        }
        return cache_[idx & 1];
    }

    // Uniform on the open interval (0,1): bin-centered 53-bit mantissa, never
    // exactly 0 or 1, so -log() and inverse CDFs are always safe.
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_exp() { return -std::log(next_double()); }

    void skip_to(std::uint64_t counter) {
        counter_ = counter;
        cache_valid_ = false;
    }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t cached_block_ = ~0ULL;
    std::uint64_t cache_[2] = {0, 0};
    bool cache_valid_ = false;
};

}  // namespace recollide::rng
