// SPDX-License-Identifier: Apache-2.0

#include "hqc/keyed_rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hqc {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

KeyedRng::KeyedRng(std::uint64_t seed, std::string_view item, std::uint32_t stage)
    : key_(mix64(mix64(seed + kGolden) ^ fnv1a64(item)) ^ mix64(static_cast<std::uint64_t>(stage) + 1)) {}

std::uint64_t KeyedRng::next_u64() {
    return mix64(key_ + kGolden * ++counter_);
}

double KeyedRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double KeyedRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int KeyedRng::uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return lo + static_cast<int>(next_u64() % span);
}

bool KeyedRng::bernoulli(double p) {
    return uniform() < p;
}

double KeyedRng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double KeyedRng::poisson(double lambda) {
    if (lambda <= 0.0) return 0.0;
    if (lambda < 30.0) {
        const double limit = std::exp(-lambda);
        double p = 1.0;
        int k = -1;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k;
    }
    return std::max(0.0, std::round(lambda + std::sqrt(lambda) * normal()));
}

}  // namespace hqc
