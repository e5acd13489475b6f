#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace weakprog {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the stream identified by (seed, a, b, c). Counter-based, so
/// streams never depend on the order in which they are requested.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Thin wrapper over mt19937_64. Distributions are constructed per draw so
/// the engine state alone is the complete RNG state.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal(double mean, double sd);
    /// Normal draw rejected until >= lower (falls back to lower after 1000 tries).
    double truncated_normal(double mean, double sd, double lower);
    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    bool bernoulli(double p);
    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), engine_);
    }

    std::string state() const;
    void set_state(const std::string& s);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace weakprog
