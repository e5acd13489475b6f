#pragma once

#include <cstdint>
#include <vector>

#include "weakprog/rng.hpp"
#include "weakprog/sequences.hpp"

namespace fixtures {

/// Random tau x P observations around 80 um with unit-scale variation.
inline std::vector<weakprog::Observation> random_observations(std::size_t n, std::uint32_t tau, std::uint32_t P,
                                                              std::uint64_t seed) {
    weakprog::Rng rng(seed);
    std::vector<weakprog::Observation> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& o = out[i];
        o.subject_id = static_cast<std::uint32_t>(i);
        o.tau = tau;
        o.P = P;
        o.x.resize(static_cast<std::size_t>(tau) * P);
        for (auto& v : o.x) v = 80.0 + rng.normal(0.0, 5.0);
        for (std::uint32_t t = 0; t < tau; ++t) o.times.push_back(0.5 * t);
        for (std::uint32_t t = 0; t < tau; ++t) o.permutation.push_back(t);
    }
    return out;
}

}  // namespace fixtures
