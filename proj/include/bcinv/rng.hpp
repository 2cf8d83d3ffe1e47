#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "bcinv/linalg.hpp"

namespace bcinv {

/// Standard normal sampler: Box-Muller on top of std::mt19937_64.
///
/// mt19937_64 is fully specified by the C++ standard, and the transform below
/// is spelled out (std::normal_distribution is implementation-defined), so a
/// seed determines every draw on any conforming toolchain.
///
/// Algorithm: u1 = (k1 + 1) / 2^53, u2 = k2 / 2^53 with k = engine() >> 11;
/// z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = sqrt(-2 ln u1) sin(2 pi u2).
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * kInv53;
        const double u2 = static_cast<double>(engine_() >> 11) * kInv53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vector vector(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = (*this)();
        return v;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bcinv
