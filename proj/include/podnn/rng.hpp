#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace podnn::rng {

// std::mt19937_64 output is fixed by the standard; the distribution
// transforms below are hand-rolled so that streams are reproducible
// across standard library implementations as well.
using Engine = std::mt19937_64;

/// Uniform double in [0, 1).
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1]; safe as a log() argument.
inline double uniform01_open(Engine& eng) {
    return static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
}

/// Box-Muller standard normal sampler with one cached value.
class NormalSampler {
public:
    explicit NormalSampler(Engine& eng) : eng_(eng) {}

    double operator()() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform01_open(eng_);
        const double u2 = uniform01(eng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    Engine& eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

/// Uniform integer in [0, bound); modulo bias is irrelevant at our scales.
inline std::size_t uniform_index(Engine& eng, std::size_t bound) {
    return static_cast<std::size_t>(eng() % bound);
}

/// Deterministic Fisher-Yates shuffle.
template <class T>
void shuffle(std::vector<T>& items, Engine& eng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = uniform_index(eng, i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace podnn::rng
