#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace labelaug {

// Portable random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the C++ standard; std::*_distribution is not, so the
// conversions to uniform/normal/bounded draws are done here explicitly.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    // Independent stream keyed by (seed, tags...). std::seed_seq's mixing is
    // specified by the standard, so the derived stream is portable too.
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace labelaug
