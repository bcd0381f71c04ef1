#include "knet/rng.hpp"

#include <cmath>
#include <numbers>

namespace knet {

SplitMix64::result_type SplitMix64::operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::uint64_t SplitMix64::below(std::uint64_t bound) {
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
        x = (*this)();
    } while (x >= limit);
    return x % bound;
}

double SplitMix64::normal() {
    if (spare_normal_) {
        double v = *spare_normal_;
        spare_normal_.reset();
        return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(theta);
    return radius * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stage) {
    SplitMix64 mixer(base ^ (0xd1b54a32d192ed03ULL * (stage + 1)));
    return mixer();
}

}  // namespace knet
