#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfstab {

using Seed = std::uint64_t;
using Engine = std::mt19937_64;

namespace detail {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Named sub-streams so that independent consumers of one master seed never collide.
enum class Stream : std::uint64_t {
    tree = 1,
    run_sample = 2,
    run_forest = 3,
    synthetic = 4,
    initial_design = 5,
    surrogate_fit = 6,
    acquisition = 7,
    evaluation = 8,
    labels = 9,
};

/// Counter-based seed derivation: the result depends only on the inputs, never on call order.
constexpr Seed derive_seed(Seed seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = detail::mix64(seed);
    for (std::uint64_t v : path) {
        h = detail::mix64(h ^ detail::mix64(v + 0x632be59bd9b4e019ULL));
    }
    return h;
}

constexpr Seed derive_seed(Seed seed, Stream stream, std::uint64_t index = 0) noexcept {
    return derive_seed(seed, {static_cast<std::uint64_t>(stream), index});
}

inline Engine make_engine(Seed seed) {
    return Engine(seed);
}

} // namespace rfstab
