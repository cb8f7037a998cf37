#pragma once

#include <cstdint>
#include <vector>

namespace bitbcnn {

// Counter-based pseudo-random stream (splitmix64 core). The same seed and
// call sequence produce identical outputs on every platform, which all
// reproducibility guarantees in this project rest on.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * ++counter_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of entropy.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Unbiased integer in [0, n); n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * ((~0ULL) / n);
        std::uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return draw % n;
    }

    // Independent derived stream; `stream_id` selects the substream.
    RngStream split(std::uint64_t stream_id) const {
        std::uint64_t z = seed_ ^ (0xd1b54a32d192ed03ULL * (stream_id + 1));
        z = (z ^ (z >> 29)) * 0xff51afd7ed558ccdULL;
        return RngStream(z ^ (z >> 32));
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace bitbcnn
