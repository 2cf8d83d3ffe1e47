#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bcinv/forward.hpp"
#include "bcinv/profiles.hpp"

using namespace bcinv;

namespace {

VelocityProfile unit_profile() { return VelocityProfile::sample(speed_unit, 0.7, 64); }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b, std::size_t count) {
    double m = 0.0;
    for (std::size_t i = 0; i < count; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// C^1 pulse with closed-form antiderivative: sin^2(pi t / w) on [0, w].
Source smooth_pulse(double w) {
    return Source::from_antiderivative(
        [w](double t) {
            const double s = std::clamp(t, 0.0, w);
            return 0.5 * s - w / (4.0 * M_PI) * std::sin(2.0 * M_PI * s / w);
        },
        "sin2 pulse");
}

double unit_pulse_trace_error(int n_x, int n_sim) {
    const Source f = smooth_pulse(0.1);
    const TraceRecord tr = solve_trace(unit_profile(), f, Simulation{0.6, n_x, n_sim});
    double m = 0.0;
    for (int j = 0; j <= n_sim; ++j) m = std::max(m, std::abs(tr.samples[j] + f.integral(0.0, tr.time(j))));
    return m;
}

}  // namespace

TEST(SolveTrace, UnitSpeedStepGivesMinusT) {
    const TraceRecord tr = solve_trace(unit_profile(), Source::step(), Simulation::paper(0.6));
    double m = 0.0;
    for (int j = 0; j <= tr.n_sim; ++j) m = std::max(m, std::abs(tr.samples[j] + tr.time(j)));
    EXPECT_LE(m, 2e-3);
    EXPECT_EQ(tr.samples.front(), 0.0);
}

TEST(SolveTrace, ZeroSourceGivesZeroTrace) {
    const TraceRecord tr = solve_trace(builtin_profile("smooth"), Source::zero(), Simulation{0.6, 256, 1024});
    for (double v : tr.samples) EXPECT_EQ(v, 0.0);
}

TEST(SolveTrace, FiniteSpeedOfPropagation) {
    // Speed 1 up to x = 0.2, then faster: no reflection returns before t = 0.4.
    const auto layered = VelocityProfile::sample([](double x) { return x < 0.2 ? 1.0 : 1.5; }, 0.7, 1400);
    const Simulation sim{0.6, 4096, 16384};
    const Source f = smooth_pulse(0.05);
    const TraceRecord a = solve_trace(layered, f, sim);
    const TraceRecord b = solve_trace(unit_profile(), f, sim);
    const auto before = static_cast<std::size_t>(0.38 / a.dt());
    EXPECT_LE(max_abs_diff(a.samples, b.samples, before), 2e-3);
    // ...and the reflection is visible afterwards.
    EXPECT_GT(max_abs_diff(a.samples, b.samples, a.samples.size()), 1e-2);
}

TEST(SolveTrace, RefinementReducesErrorSecondOrder) {
    const double e1 = unit_pulse_trace_error(512, 2048);
    const double e2 = unit_pulse_trace_error(1024, 4096);
    EXPECT_GE(e1 / e2, 3.0) << "errors " << e1 << " and " << e2;
}

TEST(SolveTrace, Linearity) {
    const VelocityProfile p = builtin_profile("smooth");
    const Simulation sim{0.6, 512, 2048};
    const Source f = smooth_pulse(0.08);
    const Source g = Source::box(0.1, 0.2, 3.0);
    const double a = 2.5;
    const double b = -0.7;
    const TraceRecord tf = solve_trace(p, f, sim);
    const TraceRecord tg = solve_trace(p, g, sim);
    const TraceRecord tc = solve_trace(p, Source::combine(a, f, b, g), sim);
    double scale = 0.0;
    double diff = 0.0;
    for (std::size_t j = 0; j < tc.samples.size(); ++j) {
        scale = std::max(scale, std::abs(tc.samples[j]));
        diff = std::max(diff, std::abs(tc.samples[j] - (a * tf.samples[j] + b * tg.samples[j])));
    }
    EXPECT_LE(diff, 1e-9 * scale);
}

TEST(SolveTrace, TimeTranslationEquivariance) {
    const VelocityProfile p = builtin_profile("smooth");
    const Simulation sim{0.6, 1024, 4096};
    const double dt = 2.0 * sim.T / sim.n_sim;
    const TimeGrid grid(0.6, 128);
    const TraceRecord a = solve_trace(p, Source::box(0.0, grid.h(), 1.0), sim);
    const TraceRecord b = solve_trace(p, Source::box(dt, grid.h() + dt, 1.0), sim);
    double m = 0.0;
    for (std::size_t j = 0; j + 1 < a.samples.size(); ++j) m = std::max(m, std::abs(b.samples[j + 1] - a.samples[j]));
    EXPECT_LE(m, 1e-3);
}

TEST(SolveTrace, CflViolationIsConfigError) {
    EXPECT_THROW(solve_trace(builtin_profile("smooth"), Source::step(), Simulation{0.6, 1024, 64}), ConfigError);
}

TEST(SolveTrace, DomainIsReflectionFree) {
    const VelocityProfile p = builtin_profile("piecewise");
    const Simulation sim = Simulation::desk();
    EXPECT_GE(reflection_free_length(p, sim), p.euclid_extent(sim.T));
    // Travel time from 0 to X_max is at least T.
    const double x_max = reflection_free_length(p, sim);
    double tau = 0.0;
    const int m = 100000;
    for (int k = 0; k < m; ++k) tau += x_max / m / p((k + 0.5) * x_max / m);
    EXPECT_GE(tau, sim.T);
}

TEST(AnalyticTrace, BoxSourceClosedForm) {
    const TimeGrid grid(0.6, 1024);
    const double h = grid.h();
    const TraceRecord tr = analytic_trace_constant(Source::basis(grid, 1), TimeGrid(0.6, 4096));
    for (int j = 0; j <= tr.n_sim; ++j) {
        const double t = tr.time(j);
        EXPECT_NEAR(tr.samples[j], -std::min(t, h) / std::sqrt(h), 1e-12);
    }
}

TEST(AnalyticTrace, StepAndZero) {
    const TimeGrid fine(0.6, 512);
    const TraceRecord s = analytic_trace_constant(Source::step(), fine);
    const TraceRecord z = analytic_trace_constant(Source::zero(), fine);
    for (int j = 0; j <= s.n_sim; ++j) {
        EXPECT_NEAR(s.samples[j], -s.time(j), 1e-12);
        EXPECT_EQ(z.samples[j], 0.0);
    }
}

TEST(Source, QuadratureForFunctionSources) {
    const Source f = Source::from_function([](double t) { return 3.0 * t; }, "linear");
    // Midpoint rule is exact on linear integrands.
    EXPECT_NEAR(f.integral(0.1, 0.5), 1.5 * (0.25 - 0.01), 1e-14);
    EXPECT_EQ(f.integral(-1.0, 0.0), 0.0);
}
