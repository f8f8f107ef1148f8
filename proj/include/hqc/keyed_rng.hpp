// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace hqc {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Counter-based generator: the i-th draw is a pure function of
/// (key, i), key = mix(seed, crop_id, stage). Draw order within one stream is
/// fixed by the caller, so outputs never depend on thread scheduling.
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::string_view item, std::uint32_t stage);
    explicit KeyedRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);
    bool bernoulli(double p);
    double normal();
    /// Knuth's product method below 30, rounded normal approximation above.
    double poisson(double lambda);

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace hqc
