// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace declab {

// splitmix64 finalizer. Bijective, so distinct inputs never collide.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ mix64(b ^ 0x6A09E667F3BCC909ULL));
}

// Counter-based generator: draw i is mix64(key, i). Streams derived from
// distinct (seed, stream) pairs are independent and cheap to create, so
// each worker or request can own one without coordination.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix64(seed, stream)) {}

    std::uint64_t next_u64() noexcept { return mix64(key_, counter_++); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Multiply-shift; bias is below 2^-32 for the
    // vocabulary-sized n used here.
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace declab
