#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace spikenas {

// Seeded RNG used everywhere randomness is needed. Streams for distinct
// purposes derive from the run seed plus a fixed tag so the draw order of
// one consumer cannot disturb another.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng stream(std::uint64_t seed, std::uint64_t tag) {
        return Rng(seed * 0x9E3779B97F4A7C15ULL + tag);
    }

    double uniform(double a, double b) {
        std::uniform_real_distribution<double> d(a, b);
        return d(gen_);
    }

    double normal(double mu, double sigma) {
        std::normal_distribution<double> d(mu, sigma);
        return d(gen_);
    }

    // Inclusive range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uniform_int_distribution<std::int64_t> d(lo, hi);
        return d(gen_);
    }

    template <class V>
    void shuffle(std::vector<V>& v) {
        std::shuffle(v.begin(), v.end(), gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace spikenas
