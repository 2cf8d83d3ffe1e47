#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bcinv/error.hpp"
#include "bcinv/linalg.hpp"
#include "bcinv/timegrid.hpp"
#include "bcinv/velocity.hpp"

namespace bcinv {

/// Boundary flux f(t), zero for t < 0. Sources with a closed-form
/// antiderivative are integrated exactly; others use 8-node midpoint quadrature.
class Source {
public:
    /// Source with antiderivative F, F(0) = 0.
    static Source from_antiderivative(std::function<double(double)> antiderivative, std::string desc) {
        Source s;
        s.antiderivative_ = std::move(antiderivative);
        s.desc_ = std::move(desc);
        return s;
    }

    static Source from_function(std::function<double(double)> f, std::string desc) {
        Source s;
        s.function_ = std::move(f);
        s.desc_ = std::move(desc);
        return s;
    }

    /// Heaviside step H.
    static Source step() {
        return from_antiderivative([](double t) { return std::max(t, 0.0); }, "step");
    }

    static Source zero() {
        return from_antiderivative([](double) { return 0.0; }, "zero");
    }

    /// height * 1_[t0, t1).
    static Source box(double t0, double t1, double height) {
        return from_antiderivative(
            [=](double t) { return height * (std::clamp(t, t0, t1) - t0); },
            "box");
    }

    /// Basis function phi_{n,N} (1-based n).
    static Source basis(const TimeGrid& grid, int n) {
        Source s = box(grid.cell_start(n), grid.cell_start(n + 1), grid.basis_height());
        s.desc_ = "phi_" + std::to_string(n) + "," + std::to_string(grid.N());
        return s;
    }

    /// a*f + b*g.
    static Source combine(double a, const Source& f, double b, const Source& g) {
        Source s;
        s.combo_ = std::make_shared<const std::pair<Source, Source>>(f, g);
        s.wa_ = a;
        s.wb_ = b;
        s.desc_ = "combination";
        return s;
    }

    /// int_a^b f(s) ds with f = 0 on (-inf, 0).
    double integral(double a, double b) const {
        a = std::max(a, 0.0);
        b = std::max(b, 0.0);
        if (b <= a) return 0.0;
        if (combo_) return wa_ * combo_->first.integral(a, b) + wb_ * combo_->second.integral(a, b);
        if (antiderivative_) return antiderivative_(b) - antiderivative_(a);
        const int nodes = 8;
        const double w = (b - a) / nodes;
        double acc = 0.0;
        for (int q = 0; q < nodes; ++q) acc += function_(a + (q + 0.5) * w);
        return acc * w;
    }

    const std::string& description() const { return desc_; }

private:
    Source() = default;
    std::function<double(double)> antiderivative_;
    std::function<double(double)> function_;
    std::shared_ptr<const std::pair<Source, Source>> combo_;
    double wa_ = 0.0;
    double wb_ = 0.0;
    std::string desc_;
};

/// Simulation sizes: n_x spatial cells on [0, X_max], n_sim time steps on [0, 2T].
struct Simulation {
    double T = 0.6;
    int n_x = 1 << 10;
    int n_sim = 1 << 12;
    double cfl_limit = 0.9;
    /// Safety factor on the reflection-free domain length.
    double domain_margin = 1.02;

    static Simulation desk(double T = 0.6) { return {T, 1 << 10, 1 << 12}; }
    static Simulation paper(double T = 0.6) { return {T, 1 << 13, 1 << 15}; }
};

/// Boundary trace u(0, t_j) at t_j = j * 2T / n_sim, j = 0..n_sim.
struct TraceRecord {
    double T = 0.0;
    int n_sim = 0;
    std::vector<double> samples;
    std::string source;

    double dt() const { return 2.0 * T / n_sim; }
    double time(int j) const { return j * dt(); }
    /// The fine grid whose cell boundaries are the sample times.
    TimeGrid grid() const { return TimeGrid(T, n_sim / 2); }
};

/// Length of the spatial domain such that the wave reflected from the far
/// Dirichlet end cannot reach x = 0 before t = 2T: tau(X_max) >= T.
inline double reflection_free_length(const VelocityProfile& profile, const Simulation& sim) {
    return sim.domain_margin * profile.euclid_extent(sim.T);
}

/// Solves u_tt = c(x)^2 u_xx on [0, X_max] x (0, 2T] with u_x(0,t) = f(t),
/// zero initial data, and u(X_max, t) = 0; returns u(0, t_j).
///
/// Explicit leapfrog. The Neumann condition uses a ghost node
/// u_{-1} = u_1 - 2 dx f^n, where f^n is the average of f over
/// [t_n - dt/2, t_n + dt/2]. The scheme starts from rest (u^{-1} = u^0 = 0), so
/// the first step carries the full boundary impulse; this keeps the scheme
/// second order for smooth sources.
inline TraceRecord solve_trace(const VelocityProfile& profile, const Source& f, const Simulation& sim) {
    if (sim.n_x < 2 || sim.n_sim < 2) throw ConfigError("solve_trace: grid sizes too small");
    if (!(sim.T > 0.0)) throw ConfigError("solve_trace: T must be positive");
    const double x_max = reflection_free_length(profile, sim);
    const double dx = x_max / sim.n_x;
    const double dt = 2.0 * sim.T / sim.n_sim;

    const int nx = sim.n_x;
    std::vector<double> lam2(static_cast<std::size_t>(nx) + 1);
    double cmax = 0.0;
    for (int i = 0; i <= nx; ++i) {
        const double c = profile(i * dx);
        cmax = std::max(cmax, c);
        lam2[static_cast<std::size_t>(i)] = (c * dt / dx) * (c * dt / dx);
    }
    const double cfl = cmax * dt / dx;
    if (cfl > sim.cfl_limit) {
        throw ConfigError("solve_trace: CFL number " + std::to_string(cfl) + " exceeds " +
                          std::to_string(sim.cfl_limit));
    }

    std::vector<double> prev(static_cast<std::size_t>(nx) + 1, 0.0);
    std::vector<double> cur(prev);
    std::vector<double> next(prev);

    TraceRecord out;
    out.T = sim.T;
    out.n_sim = sim.n_sim;
    out.source = f.description();
    out.samples.reserve(static_cast<std::size_t>(sim.n_sim) + 1);
    out.samples.push_back(0.0);

    for (int n = 0; n < sim.n_sim; ++n) {
        const double tn = n * dt;
        const double fn = f.integral(tn - 0.5 * dt, tn + 0.5 * dt) / dt;
        next[0] = 2.0 * cur[0] - prev[0] + lam2[0] * (2.0 * cur[1] - 2.0 * cur[0] - 2.0 * dx * fn);
        for (int i = 1; i < nx; ++i) {
            const auto k = static_cast<std::size_t>(i);
            next[k] = 2.0 * cur[k] - prev[k] + lam2[k] * (cur[k + 1] - 2.0 * cur[k] + cur[k - 1]);
        }
        next[static_cast<std::size_t>(nx)] = 0.0;
        if (!std::isfinite(next[0])) throw NumericError("solve_trace: non-finite field values");
        std::swap(prev, cur);
        std::swap(cur, next);
        out.samples.push_back(cur[0]);
    }
    for (double v : out.samples) {
        if (!std::isfinite(v)) throw NumericError("solve_trace: numeric blow-up");
    }
    return out;
}

/// Closed-form trace for c = 1: u(0, t) = -int_0^t f, sampled at the cell
/// boundaries of `fine` (so n_sim = fine.cells()).
inline TraceRecord analytic_trace_constant(const Source& f, const TimeGrid& fine) {
    TraceRecord out;
    out.T = fine.T();
    out.n_sim = fine.cells();
    out.source = f.description();
    out.samples.resize(static_cast<std::size_t>(out.n_sim) + 1);
    double acc = 0.0;
    out.samples[0] = 0.0;
    for (int j = 1; j <= out.n_sim; ++j) {
        acc += f.integral(out.time(j - 1), out.time(j));
        out.samples[static_cast<std::size_t>(j)] = -acc;
    }
    return out;
}

/// L2 projection of a trace onto P^N, reading the samples as a piecewise
/// linear function (exact cell integrals by the trapezoid rule).
inline PiecewiseFn project_trace(const TraceRecord& trace, const TimeGrid& grid) {
    if (std::abs(trace.T - grid.T()) > 1e-12 * grid.T()) throw ConfigError("project_trace: horizon mismatch");
    if (trace.n_sim % grid.cells() != 0) {
        throw ConfigError("project_trace: trace sampling does not refine the target grid");
    }
    if (trace.samples.size() != static_cast<std::size_t>(trace.n_sim) + 1) {
        throw ConfigError("project_trace: sample count must be n_sim + 1");
    }
    const int per_cell = trace.n_sim / grid.cells();
    const double dt = trace.dt();
    const double scale = 1.0 / std::sqrt(grid.h());
    Vector c(grid.cells());
    for (int k = 0; k < grid.cells(); ++k) {
        double acc = 0.0;
        for (int q = 0; q < per_cell; ++q) {
            const auto j = static_cast<std::size_t>(k * per_cell + q);
            acc += 0.5 * (trace.samples[j] + trace.samples[j + 1]);
        }
        c[k] = acc * dt * scale;
    }
    return {grid, c};
}

}  // namespace bcinv
