#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bcinv/error.hpp"

namespace bcinv {

/// A priori box of the admissible speeds: C0 <= c <= C1 and c - 1 supported
/// in [L0, L1].
struct PriorBox {
    double c0 = 0.01;
    double c1 = 10.0;
    double l0 = 0.01;
    double l1 = 0.6;
};

/// Wave speed sampled on a uniform grid x_i = x0 + i dx. Between samples the
/// speed is linearly interpolated; outside the sampled range it is 1.
class VelocityProfile {
public:
    VelocityProfile(double x0, double dx, std::vector<double> cvals, PriorBox box = {})
        : x0_(x0), dx_(dx), cvals_(std::move(cvals)), box_(box) {
        if (!(dx > 0.0)) throw ConfigError("VelocityProfile: grid spacing must be positive");
        if (cvals_.size() < 2) throw ConfigError("VelocityProfile: need at least two samples");
        for (double c : cvals_) {
            if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("VelocityProfile: speed must be positive and finite");
        }
    }

    /// Samples `speed` on n+1 points covering [0, x_max].
    static VelocityProfile sample(const std::function<double(double)>& speed, double x_max, int n,
                                  PriorBox box = {}) {
        std::vector<double> c(static_cast<std::size_t>(n) + 1);
        const double dx = x_max / n;
        for (int i = 0; i <= n; ++i) c[static_cast<std::size_t>(i)] = speed(i * dx);
        return {0.0, dx, std::move(c), box};
    }

    double operator()(double x) const {
        const double s = (x - x0_) / dx_;
        if (s < 0.0 || s > static_cast<double>(cvals_.size() - 1)) return 1.0;
        const auto i = std::min(static_cast<std::size_t>(s), cvals_.size() - 2);
        const double frac = s - static_cast<double>(i);
        return (1.0 - frac) * cvals_[i] + frac * cvals_[i + 1];
    }

    double x0() const { return x0_; }
    double dx() const { return dx_; }
    double x_end() const { return x0_ + dx_ * static_cast<double>(cvals_.size() - 1); }
    std::size_t size() const { return cvals_.size(); }
    double x(std::size_t i) const { return x0_ + dx_ * static_cast<double>(i); }
    const std::vector<double>& cvals() const { return cvals_; }
    const PriorBox& box() const { return box_; }

    double max_speed() const { return std::max(1.0, *std::max_element(cvals_.begin(), cvals_.end())); }
    double min_speed() const { return std::min(1.0, *std::min_element(cvals_.begin(), cvals_.end())); }

    /// Checks the a priori box: C0 <= c <= C1, and c = 1 (within tol) outside [L0, L1].
    void validate(double tol = 1e-9) const {
        for (std::size_t i = 0; i < cvals_.size(); ++i) {
            const double c = cvals_[i];
            if (c < box_.c0 - tol || c > box_.c1 + tol) throw ConfigError("VelocityProfile: speed outside [C0, C1]");
            const double xi = x(i);
            if ((xi < box_.l0 - tol || xi > box_.l1 + tol) && std::abs(c - 1.0) > tol) {
                throw ConfigError("VelocityProfile: speed differs from 1 outside [L0, L1]");
            }
        }
    }

    /// Smallest x with tau(x) = int_0^x 1/c >= tau_target (trapezoid on samples,
    /// unit speed beyond the sampled range).
    double euclid_extent(double tau_target) const {
        double tau = 0.0;
        if (x0_ > 0.0) {
            if (x0_ >= tau_target) return tau_target;
            tau = x0_;
        }
        for (std::size_t i = 0; i + 1 < cvals_.size(); ++i) {
            const double a = 1.0 / cvals_[i];
            const double b = 1.0 / cvals_[i + 1];
            const double step = 0.5 * (a + b) * dx_;
            if (tau + step >= tau_target) {
                // Linear inverse inside the cell is accurate enough for sizing.
                return x(i) + dx_ * (tau_target - tau) / step;
            }
            tau += step;
        }
        return x_end() + (tau_target - tau);
    }

private:
    double x0_;
    double dx_;
    std::vector<double> cvals_;
    PriorBox box_;
};

}  // namespace bcinv
