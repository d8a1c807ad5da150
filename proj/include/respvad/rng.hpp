#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace respvad {

// Seeded generator whose output is bit-identical across standard libraries:
// only the raw mt19937_64 stream is used, the distributions are written here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Sub-seed for a named stage: splitmix64(seed ^ fnv1a64(stage)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

} // namespace respvad
