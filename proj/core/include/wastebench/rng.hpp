#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace wastebench {

// Deterministic random primitives. Everything here is fully specified by
// this code, not by the standard library, so that seeded runs reproduce
// bit-for-bit across compilers and platforms.

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// FNV-1a over the bytes, then mixed with the incoming seed.
std::uint64_t hash_string(std::uint64_t seed, std::string_view s);

// Counter-based generator: draw i is a pure function of (key, i). Streams
// keyed on (seed, image_id, epoch) stay reproducible no matter how many
// worker threads consume them or in what order items are processed.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    // 53-bit mantissa uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n);

    // Box-Muller, one value per call (the spare is cached).
    double normal();

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Fisher-Yates with the counter generator.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, CounterRng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace wastebench
