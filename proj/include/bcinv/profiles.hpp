#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "bcinv/error.hpp"
#include "bcinv/velocity.hpp"

namespace bcinv {

/// C-infinity transition from 0 (s <= 0) to 1 (s >= 1).
inline double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

/// Smooth cutoff equal to 1 on [l0 + w, l1 - w] and 0 outside (l0, l1).
inline double taper(double x, double l0, double l1, double w) {
    return smooth_step((x - l0) / w) * smooth_step((l1 - x) / w);
}

/// Smooth single bump ("c_s").
inline double speed_smooth(double x) {
    const double g = std::exp(-std::pow((x - 0.3) / 0.07, 2));
    return 1.0 + 0.5 * g * taper(x, 0.01, 0.6, 0.04);
}

/// Piecewise constant ("c_p").
inline double speed_piecewise(double x) { return (x >= 0.25 && x <= 0.4) ? 1.5 : 1.0; }

/// Two-bump calibration profile ("c_c"): a fast and a slow inclusion.
inline double speed_calibration(double x) {
    const double fast = 0.4 * std::exp(-std::pow((x - 0.2) / 0.05, 2));
    const double slow = 0.3 * std::exp(-std::pow((x - 0.45) / 0.05, 2));
    return 1.0 + (fast - slow) * taper(x, 0.01, 0.6, 0.04);
}

inline double speed_unit(double) { return 1.0; }

/// Looks up a built-in profile by id: unit, smooth, piecewise, calibration.
inline std::function<double(double)> builtin_speed(const std::string& id) {
    if (id == "unit") return speed_unit;
    if (id == "smooth") return speed_smooth;
    if (id == "piecewise") return speed_piecewise;
    if (id == "calibration") return speed_calibration;
    throw ConfigError("unknown built-in profile '" + id + "' (expected unit, smooth, piecewise or calibration)");
}

/// Samples a built-in profile on [0, 0.7] with 4097 points.
inline VelocityProfile builtin_profile(const std::string& id, PriorBox box = {}) {
    return VelocityProfile::sample(builtin_speed(id), 0.7, 1 << 12, box);
}

}  // namespace bcinv
