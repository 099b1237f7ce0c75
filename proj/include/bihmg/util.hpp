// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bihmg {

/// Thrown by factorizations when a pivot is not positive.
class NotSpdError : public std::runtime_error {
public:
    NotSpdError(const std::string& what, int pivot_index)
        : std::runtime_error(what), pivot(pivot_index) {}
    int pivot;
};

/// Deterministic random stream. mt19937_64 is bit-exact across platforms;
/// the uniform mapping avoids std::uniform_real_distribution, whose output
/// is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [-1, 1).
    double symmetric() { return 2.0 * uniform() - 1.0; }

private:
    std::mt19937_64 gen_;
};

}  // namespace bihmg
