#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "bcinv/error.hpp"
#include "bcinv/reginv.hpp"
#include "bcinv/velocity.hpp"

namespace bcinv {

/// Piecewise-constant function on [edges.front(), edges.back()), cells
/// half-open on the right; `outside` is returned elsewhere.
struct StepCurve {
    std::vector<double> edges;
    std::vector<double> values;
    double outside = std::numeric_limits<double>::quiet_NaN();

    double operator()(double t) const {
        if (!(t >= edges.front()) || !(t < edges.back())) return outside;
        const auto it = std::upper_bound(edges.begin(), edges.end(), t);
        const auto k = static_cast<std::size_t>(it - edges.begin()) - 1;
        return values[std::min(k, values.size() - 1)];
    }

    std::size_t cells() const { return values.size(); }
};

/// Continuous piecewise-linear interpolant of a volume curve through (0, 0)
/// and the samples (r_j, s_j); constant beyond the last radius.
inline std::function<double(double)> curve_interpolant(const VolumeCurve& vc) {
    std::vector<double> r{0.0};
    std::vector<double> s{0.0};
    r.insert(r.end(), vc.radii.begin(), vc.radii.end());
    s.insert(s.end(), vc.values.begin(), vc.values.end());
    return [r = std::move(r), s = std::move(s)](double t) {
        if (t <= r.front()) return s.front();
        if (t >= r.back()) return s.back();
        const auto it = std::upper_bound(r.begin(), r.end(), t);
        const auto k = static_cast<std::size_t>(it - r.begin());
        const double lam = (t - r[k - 1]) / (r[k] - r[k - 1]);
        return (1.0 - lam) * s[k - 1] + lam * s[k];
    };
}

/// Difference quotient D_h f on (0, T): f(h)/h on (0, h), forward differences
/// on [jh, jh + h) for 1 <= j < N_h, and (f(T) - f(N_h h)) / (T - N_h h) on the
/// last cell, where T - h <= N_h h < T.
inline StepCurve dh_derivative(const std::function<double(double)>& f, double h, double horizon) {
    if (!(h > 0.0)) throw ConfigError("dh_derivative: h must be positive");
    if (!(h < horizon)) throw ConfigError("dh_derivative: h must be smaller than T");
    // Largest integer with N_h h < T; a relative slack absorbs T/h rounding.
    int nh = static_cast<int>(std::ceil(horizon / h - 1e-9)) - 1;
    nh = std::max(nh, 1);
    StepCurve out;
    out.edges.push_back(0.0);
    out.values.push_back(f(h) / h);
    for (int j = 1; j < nh; ++j) {
        out.edges.push_back(j * h);
        out.values.push_back((f((j + 1) * h) - f(j * h)) / h);
    }
    const double last = nh * h;
    out.edges.push_back(last);
    out.values.push_back((f(horizon) - f(last)) / (horizon - last));
    out.edges.push_back(horizon);
    for (double v : out.values) {
        if (!std::isfinite(v)) throw NumericError("dh_derivative: non-finite difference quotient");
    }
    return out;
}

/// W = E o z: clamps into [c0, c1], inverts, and extends by 1 outside (0, T).
inline StepCurve clamp_invert(const StepCurve& g, double c0, double c1) {
    if (!(c0 > 0.0) || !(c1 >= c0)) throw ConfigError("clamp_invert: need 0 < C0 <= C1");
    StepCurve w = g;
    for (double& v : w.values) {
        const double clamped = std::isnan(v) ? c1 : std::clamp(v, c0, c1);
        v = 1.0 / clamped;
    }
    w.outside = 1.0;
    return w;
}

/// Piecewise-linear increasing map given by knots (r_k, x_k) with unit slope
/// beyond the last knot.
class MonotoneTable {
public:
    MonotoneTable(std::vector<double> r, std::vector<double> x, double tail_slope)
        : r_(std::move(r)), x_(std::move(x)), tail_slope_(tail_slope) {
        if (r_.size() < 2 || r_.size() != x_.size()) throw NumericError("MonotoneTable: malformed table");
        for (std::size_t k = 1; k < r_.size(); ++k) {
            if (!(r_[k] > r_[k - 1]) || !(x_[k] > x_[k - 1])) throw NumericError("MonotoneTable: table is not strictly increasing");
        }
        if (!(tail_slope_ > 0.0)) throw NumericError("MonotoneTable: tail slope must be positive");
    }

    /// Forward map r -> x.
    double forward(double r) const { return interp(r_, x_, r, tail_slope_); }
    /// Inverse map x -> r (bisection for the bracketing knot, then linear).
    double inverse(double x) const { return interp(x_, r_, x, 1.0 / tail_slope_); }

private:
    static double interp(const std::vector<double>& a, const std::vector<double>& b, double v, double tail) {
        if (v <= a.front()) {
            const double slope = (b[1] - b[0]) / (a[1] - a[0]);
            return b.front() + slope * (v - a.front());
        }
        if (v >= a.back()) return b.back() + tail * (v - a.back());
        std::size_t lo = 0;
        std::size_t hi = a.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (a[mid] <= v ? lo : hi) = mid;
        }
        const double lam = (v - a[lo]) / (a[hi] - a[lo]);
        return b[lo] + lam * (b[hi] - b[lo]);
    }

    std::vector<double> r_;
    std::vector<double> x_;
    double tail_slope_;
};

/// chi(w)(r) = int_0^r w for a positive step function extended by 1 beyond
/// its last edge. The integral is exact: linear between the step edges.
inline MonotoneTable travel_map(const StepCurve& w) {
    std::vector<double> r{0.0};
    std::vector<double> x{0.0};
    if (w.edges.front() > 0.0) {
        r.push_back(w.edges.front());
        x.push_back(w.edges.front());
    }
    for (std::size_t k = 0; k < w.cells(); ++k) {
        const double v = w.values[k];
        if (!(v > 0.0)) throw NumericError("travel_map: speed must be positive");
        const double width = w.edges[k + 1] - w.edges[k];
        r.push_back(w.edges[k + 1]);
        x.push_back(x.back() + v * width);
    }
    return {std::move(r), std::move(x), 1.0};
}

/// Same map for a general positive function, by cumulative trapezoid on a
/// uniform grid of step dr over [0, r_max], unit slope beyond.
inline MonotoneTable travel_map(const std::function<double(double)>& w, double r_max, int samples) {
    if (samples < 2 || !(r_max > 0.0)) throw ConfigError("travel_map: need r_max > 0 and at least two samples");
    const double dr = r_max / samples;
    std::vector<double> r(static_cast<std::size_t>(samples) + 1);
    std::vector<double> x(r.size());
    double prev = w(0.0);
    for (int k = 1; k <= samples; ++k) {
        const double cur = w(k * dr);
        if (!(prev > 0.0) || !(cur > 0.0)) throw NumericError("travel_map: speed must be positive");
        r[static_cast<std::size_t>(k)] = k * dr;
        x[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k) - 1] + 0.5 * (prev + cur) * dr;
        prev = cur;
    }
    return {std::move(r), std::move(x), 1.0};
}

/// Phi(w)(x) = w(chi(w)^{-1}(x)) on (L0, L1), and 1 elsewhere.
inline std::function<double(double)> travel_to_euclid(const std::function<double(double)>& w, const MonotoneTable& chi,
                                                      double l0, double l1) {
    return [w, chi, l0, l1](double x) {
        if (!(x > l0) || !(x < l1)) return 1.0;
        return w(chi.inverse(x));
    };
}

inline std::function<double(double)> travel_to_euclid(const StepCurve& w, double l0, double l1) {
    return travel_to_euclid([w](double r) { return w(r); }, travel_map(w), l0, l1);
}

/// Uniform samples x_i = x0 + i dx with linear interpolation; `outside`
/// beyond the sampled range.
struct SampledFunction {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> values;
    double outside = 1.0;

    double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
    double x_end() const { return x(values.size() - 1); }

    double operator()(double t) const {
        const double s = (t - x0) / dx;
        const double top = static_cast<double>(values.size() - 1);
        if (s < -1e-12 || s > top + 1e-12) return outside;
        const double sc = std::clamp(s, 0.0, top);
        const auto i = std::min(static_cast<std::size_t>(sc), values.size() - 2);
        const double lam = sc - static_cast<double>(i);
        return (1.0 - lam) * values[i] + lam * values[i + 1];
    }
};

/// Bump exp(1/(x^2 - 1)) on (-1, 1), without its normalising constant.
inline double bump(double x) {
    const double q = x * x;
    return q < 1.0 ? std::exp(1.0 / (q - 1.0)) : 0.0;
}

/// Gamma_nu f = eta_nu * f sampled on n points over [a, b].
///
/// The kernel is sampled at the grid offsets inside (-nu, nu) and renormalised
/// to unit discrete mass, so constants are reproduced exactly and the output
/// stays within the range of the input samples.
inline SampledFunction mollify(const std::function<double(double)>& f, double nu, double a, double b, int n,
                               double outside = 1.0) {
    if (n < 2 || !(b > a)) throw ConfigError("mollify: need b > a and at least two points");
    if (!(nu > 0.0)) throw ConfigError("mollify: nu must be positive");
    const double dx = (b - a) / (n - 1);
    if (nu < 2.0 * dx) throw ConfigError("mollify: nu is below two grid steps; kernel is unresolved");
    const int half = static_cast<int>(std::ceil(nu / dx));
    std::vector<double> kernel(2 * static_cast<std::size_t>(half) + 1);
    double mass = 0.0;
    for (int k = -half; k <= half; ++k) {
        const double wk = bump(k * dx / nu);
        kernel[static_cast<std::size_t>(k + half)] = wk;
        mass += wk;
    }
    for (double& wk : kernel) wk /= mass;

    std::vector<double> ext(static_cast<std::size_t>(n + 2 * half));
    for (int i = -half; i < n + half; ++i) {
        const double v = f(a + i * dx);
        if (!std::isfinite(v)) throw NumericError("mollify: non-finite input sample");
        ext[static_cast<std::size_t>(i + half)] = v;
    }
    SampledFunction out{a, dx, std::vector<double>(static_cast<std::size_t>(n)), outside};
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * ext[static_cast<std::size_t>(i) + k];
        out.values[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

/// Exact travel-time quantities of a sampled profile, used as test oracles:
/// tau(x) = int_0^x 1/c, chi = tau^{-1}, V(r) = int_0^{chi(r)} c^{-2}, and
/// v(r) = c(chi(r)). Integrals are closed form for the piecewise-linear c.
class TravelTimeOracle {
public:
    explicit TravelTimeOracle(const VelocityProfile& p) {
        auto push = [&](double x, double c) {
            xs_.push_back(x);
            cs_.push_back(c);
        };
        push(0.0, p.x0() > 0.0 ? 1.0 : p(0.0));
        if (p.x0() > 0.0) {
            push(p.x0(), 1.0);
            push(p.x0(), p.cvals().front());
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p.x(i) <= 0.0) continue;
            push(p.x(i), p.cvals()[i]);
        }
        push(p.x_end(), 1.0);
        tau_.assign(xs_.size(), 0.0);
        vol_.assign(xs_.size(), 0.0);
        for (std::size_t k = 1; k < xs_.size(); ++k) {
            tau_[k] = tau_[k - 1] + seg_tau(k, xs_[k]);
            vol_[k] = vol_[k - 1] + seg_vol(k, xs_[k]);
        }
    }

    double c(double x) const {
        if (x >= xs_.back()) return 1.0;
        const std::size_t k = segment_of_x(x);
        return c_at(k, x);
    }

    double tau(double x) const {
        if (x >= xs_.back()) return tau_.back() + (x - xs_.back());
        const std::size_t k = segment_of_x(x);
        return tau_[k - 1] + seg_tau(k, x);
    }

    double chi(double r) const {
        if (r <= 0.0) return 0.0;
        if (r >= tau_.back()) return xs_.back() + (r - tau_.back());
        const auto it = std::upper_bound(tau_.begin(), tau_.end(), r);
        const auto k = static_cast<std::size_t>(it - tau_.begin());
        const double xa = xs_[k - 1];
        const double ca = cs_[k - 1];
        const double slope = (cs_[k] - cs_[k - 1]) / (xs_[k] - xs_[k - 1]);
        const double dt = r - tau_[k - 1];
        if (std::abs(slope) < 1e-14) return xa + ca * dt;
        // c(x) = ca exp(slope * (tau - tau_a)) along the segment.
        return xa + ca * (std::exp(slope * dt) - 1.0) / slope;
    }

    double volume(double r) const {
        const double x = chi(r);
        if (x >= xs_.back()) return vol_.back() + (x - xs_.back());
        const std::size_t k = segment_of_x(x);
        return vol_[k - 1] + seg_vol(k, x);
    }

    double v(double r) const { return c(chi(r)); }

private:
    std::size_t segment_of_x(double x) const {
        // Segment k spans [xs_[k-1], xs_[k]) with positive width.
        auto it = std::upper_bound(xs_.begin(), xs_.end(), std::max(x, 0.0));
        auto k = static_cast<std::size_t>(it - xs_.begin());
        return std::clamp<std::size_t>(k, 1, xs_.size() - 1);
    }

    double c_at(std::size_t k, double x) const {
        const double width = xs_[k] - xs_[k - 1];
        if (width <= 0.0) return cs_[k];
        const double lam = (x - xs_[k - 1]) / width;
        return (1.0 - lam) * cs_[k - 1] + lam * cs_[k];
    }

    /// int_{x_{k-1}}^{x} 1/c for x inside segment k.
    double seg_tau(std::size_t k, double x) const {
        const double d = x - xs_[k - 1];
        if (d <= 0.0) return 0.0;
        const double ca = cs_[k - 1];
        const double cx = c_at(k, x);
        if (std::abs(cx - ca) < 1e-14 * ca) return d / ca;
        return d * (std::log(cx) - std::log(ca)) / (cx - ca);
    }

    /// int_{x_{k-1}}^{x} 1/c^2 for x inside segment k.
    double seg_vol(std::size_t k, double x) const {
        const double d = x - xs_[k - 1];
        if (d <= 0.0) return 0.0;
        return d / (cs_[k - 1] * c_at(k, x));
    }

    std::vector<double> xs_;
    std::vector<double> cs_;
    std::vector<double> tau_;
    std::vector<double> vol_;
};

/// Error of an estimate against the true speed: L2 over the sampling grid of
/// the estimate (trapezoid rule) and max-abs over the grid points in (0, l1).
struct SpeedError {
    double l2 = 0.0;
    double linf = 0.0;
};

inline SpeedError speed_error(const SampledFunction& est, const std::function<double(double)>& truth, double l1) {
    SpeedError e;
    double acc = 0.0;
    const std::size_t n = est.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = est.values[i] - truth(est.x(i));
        const double wgt = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        acc += wgt * d * d;
        const double xi = est.x(i);
        if (xi > 0.0 && xi < l1) e.linf = std::max(e.linf, std::abs(d));
    }
    e.l2 = std::sqrt(acc * est.dx);
    return e;
}

}  // namespace bcinv
