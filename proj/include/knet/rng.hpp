#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>

namespace knet {

/// SplitMix64 generator. Every stochastic step in the library draws from one of
/// these so that runs are reproducible from a single seed.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    /// Unbiased integer in [lo, hi].
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }

    /// Standard normal draw via Box-Muller; the paired value is cached.
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
    std::optional<double> spare_normal_;
};

/// Independent stream seed for a pipeline stage, derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stage);

}  // namespace knet
