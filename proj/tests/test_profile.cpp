#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bcinv/profile.hpp"
#include "bcinv/profiles.hpp"

using namespace bcinv;

namespace {

StepCurve constant_curve(double v, double horizon, int cells) {
    StepCurve c;
    for (int k = 0; k <= cells; ++k) c.edges.push_back(horizon * k / cells);
    c.values.assign(static_cast<std::size_t>(cells), v);
    c.outside = 1.0;
    return c;
}

}  // namespace

TEST(DhDerivative, ExactOnIdentity) {
    for (double h : {0.01, 0.07, 0.25}) {
        const StepCurve d = dh_derivative([](double t) { return t; }, h, 0.6);
        for (double v : d.values) EXPECT_NEAR(v, 1.0, 1e-12);
        EXPECT_EQ(d.edges.front(), 0.0);
        EXPECT_EQ(d.edges.back(), 0.6);
    }
}

TEST(DhDerivative, ConstantFunction) {
    const double h = 0.07;
    const StepCurve d = dh_derivative([](double) { return 1.0; }, h, 0.6);
    EXPECT_NEAR(d.values.front(), 1.0 / h, 1e-12);
    for (std::size_t k = 1; k < d.cells(); ++k) EXPECT_EQ(d.values[k], 0.0);
}

TEST(DhDerivative, ForwardDifferenceOfSquare) {
    const StepCurve d = dh_derivative([](double t) { return t * t; }, 0.1, 0.6);
    EXPECT_NEAR(d(0.25), 0.5, 1e-12);
    EXPECT_NEAR(d(0.2), 0.5, 1e-12);
}

TEST(DhDerivative, LastCellPartition) {
    // T/h = 0.6/0.07 = 8.57: N_h = 8 with T - h <= N_h h < T.
    const StepCurve d = dh_derivative([](double t) { return 3.0 * t + 1.0; }, 0.07, 0.6);
    ASSERT_EQ(d.cells(), 9u);
    EXPECT_NEAR(d.edges[8], 0.56, 1e-12);
    for (std::size_t k = 1; k < d.cells(); ++k) EXPECT_NEAR(d.values[k], 3.0, 1e-12);
    // Grid-aligned h: the last cell is a full cell.
    const StepCurve e = dh_derivative([](double t) { return t; }, 0.6 / 128, 0.6);
    EXPECT_EQ(e.cells(), 128u);
}

TEST(DhDerivative, RejectsLargeStep) {
    EXPECT_THROW(dh_derivative([](double t) { return t; }, 0.6, 0.6), ConfigError);
    EXPECT_THROW(dh_derivative([](double t) { return t; }, 0.0, 0.6), ConfigError);
}

TEST(ClampInvert, Examples) {
    const StepCurve five = clamp_invert(constant_curve(5.0, 0.6, 4), 0.01, 10.0);
    EXPECT_NEAR(five(0.3), 0.2, 1e-15);
    EXPECT_EQ(five(0.7), 1.0);
    EXPECT_EQ(five(-0.1), 1.0);
    EXPECT_NEAR(clamp_invert(constant_curve(-3.0, 0.6, 4), 0.01, 10.0)(0.3), 100.0, 1e-12);
    EXPECT_NEAR(clamp_invert(constant_curve(1e6, 0.6, 4), 0.01, 10.0)(0.3), 0.1, 1e-15);
}

TEST(TravelToEuclid, UnitAndConstantSpeeds) {
    const auto unit = travel_to_euclid(constant_curve(1.0, 0.6, 8), 0.01, 0.6);
    for (double x = -0.2; x < 1.0; x += 0.013) EXPECT_NEAR(unit(x), 1.0, 1e-15);
    const auto fast = travel_to_euclid(constant_curve(1.7, 0.6, 8), 0.01, 0.6);
    for (double x = 0.02; x < 0.59; x += 0.013) EXPECT_NEAR(fast(x), 1.7, 1e-15);
    EXPECT_EQ(fast(0.005), 1.0);
    EXPECT_EQ(fast(0.65), 1.0);
}

TEST(TravelToEuclid, TwoPieceClosedForm) {
    // w = v0 on (0, r0), 1 after: chi(r) = v0 r then v0 r0 + (r - r0), so
    // Phi(w)(x) = v0 for x < v0 r0 and 1 beyond.
    for (double v0 : {0.5, 1.6, 3.0}) {
        const double r0 = 0.15;
        StepCurve w;
        w.edges = {0.0, r0, 0.6};
        w.values = {v0, 1.0};
        w.outside = 1.0;
        const auto phi = travel_to_euclid(w, 0.01, 0.6);
        for (double x = 0.011; x < 0.6; x += 0.0037) {
            if (std::abs(x - v0 * r0) < 1e-9) continue;
            EXPECT_NEAR(phi(x), x < v0 * r0 ? v0 : 1.0, 1e-6) << "x = " << x;
        }
    }
}

TEST(TravelMap, RoundTripAndMonotone) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.1, 100.0);
    StepCurve w;
    const int cells = 128;
    for (int k = 0; k <= cells; ++k) w.edges.push_back(0.6 * k / cells);
    for (int k = 0; k < cells; ++k) w.values.push_back(u(gen));
    const MonotoneTable chi = travel_map(w);
    double prev = -1.0;
    for (int k = 0; k <= 1000; ++k) {
        const double r = 0.7 * k / 1000.0;
        const double x = chi.forward(r);
        EXPECT_GT(x, prev);
        prev = x;
        EXPECT_NEAR(chi.inverse(x), r, 1e-9);
        EXPECT_NEAR(chi.forward(chi.inverse(x)), x, 1e-9);
    }
}

TEST(TravelMap, SampledVersionAgreesWithExact) {
    const auto w = [](double r) { return 1.0 + 0.5 * std::sin(10.0 * r); };
    const MonotoneTable chi = travel_map(w, 0.6, 1 << 14);
    // int_0^r = r + 0.05 (1 - cos(10 r)).
    for (double r = 0.0; r <= 0.6; r += 0.01) EXPECT_NEAR(chi.forward(r), r + 0.05 * (1.0 - std::cos(10.0 * r)), 1e-8);
}

TEST(Mollify, PreservesConstants) {
    const SampledFunction m = mollify([](double) { return 7.0; }, 0.05, 0.0, 1.0, 2048);
    for (double v : m.values) EXPECT_NEAR(v, 7.0, 1e-12);
}

TEST(Mollify, StepBecomesMonotoneRamp) {
    const double nu = 0.05;
    const SampledFunction m = mollify([](double x) { return x > 0.0 ? 1.0 : 0.0; }, nu, -0.5, 0.5, 2001);
    for (std::size_t i = 1; i < m.values.size(); ++i) EXPECT_GE(m.values[i], m.values[i - 1] - 1e-15);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const double x = m.x(i);
        if (x < -nu) {
            EXPECT_EQ(m.values[i], 0.0);
        }
        if (x > nu) {
            EXPECT_NEAR(m.values[i], 1.0, 1e-15);
        }
    }
}

TEST(Mollify, PreservesLinearFunctions) {
    const SampledFunction m = mollify([](double x) { return x; }, 0.03, 0.0, 1.0, 2048);
    for (std::size_t i = 0; i < m.values.size(); ++i) EXPECT_NEAR(m.values[i], m.x(i), 1e-10);
}

TEST(Mollify, RejectsUnresolvedKernel) {
    EXPECT_THROW(mollify([](double) { return 1.0; }, 1e-4, 0.0, 1.0, 2048), ConfigError);
    EXPECT_THROW(mollify([](double) { return 1.0; }, -1.0, 0.0, 1.0, 2048), ConfigError);
}

TEST(Mollify, NeverExpandsRange) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-3.0, 5.0);
    std::vector<double> raw(512);
    for (double& v : raw) v = u(gen);
    const SampledFunction base{0.0, 1.0 / 511, raw, 0.0};
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const SampledFunction m = mollify([&](double x) { return base(x); }, 0.02, 0.0, 1.0, 1024, 0.0);
    for (double v : m.values) {
        EXPECT_GE(v, std::min(*lo, 0.0) - 1e-12);
        EXPECT_LE(v, std::max(*hi, 0.0) + 1e-12);
    }
}

TEST(TravelTimeOracle, UnitSpeed) {
    const TravelTimeOracle o(VelocityProfile::sample(speed_unit, 0.7, 16));
    for (double x : {0.0, 0.1, 0.33, 0.7, 1.2}) {
        EXPECT_NEAR(o.tau(x), x, 1e-14);
        EXPECT_NEAR(o.volume(x), x, 1e-14);
        EXPECT_NEAR(o.v(x), 1.0, 1e-14);
    }
}

TEST(TravelTimeOracle, PiecewiseDoubleSpeed) {
    const double l0 = 0.1;
    const double l1 = 0.5;
    const VelocityProfile p(l0, (l1 - l0) / 8, std::vector<double>(9, 2.0));
    const TravelTimeOracle o(p);
    EXPECT_NEAR(o.tau(l1), l0 + (l1 - l0) / 2.0, 1e-14);
    EXPECT_NEAR(o.chi(l0 + 0.1), l0 + 0.2, 1e-14);
    // dV = c^{-2} dx: V at the far end is l0 + (l1 - l0)/4.
    EXPECT_NEAR(o.volume(o.tau(l1)), l0 + (l1 - l0) / 4.0, 1e-14);
}

TEST(TravelTimeOracle, SmoothBumpSelfConvergence) {
    const TravelTimeOracle a(VelocityProfile::sample(speed_smooth, 0.7, 1 << 16));
    const TravelTimeOracle b(VelocityProfile::sample(speed_smooth, 0.7, 1 << 17));
    for (double r = 0.0; r <= 0.6; r += 0.05) EXPECT_NEAR(a.volume(r), b.volume(r), 1e-8);
}

TEST(Chain, ExactUnitVolumeGivesUnitSpeed) {
    const double T = 0.6;
    const int n = 128;
    const double h = T / n;
    VolumeCurve vc;
    for (int j = 1; j <= n; ++j) {
        vc.radii.push_back(j * h);
        vc.values.push_back(j * h);
    }
    const StepCurve d = dh_derivative(curve_interpolant(vc), h, T);
    const StepCurve w = clamp_invert(d, 0.01, 10.0);
    const double nu = 0.01;
    const SampledFunction c = mollify(travel_to_euclid(w, 0.01, 0.6), nu, 0.0, 0.6 + 4 * nu, 2048);
    for (double v : c.values) EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(CurveInterpolant, PassesThroughOrigin) {
    VolumeCurve vc;
    vc.radii = {0.1, 0.2};
    vc.values = {0.3, 0.5};
    const auto f = curve_interpolant(vc);
    EXPECT_EQ(f(0.0), 0.0);
    EXPECT_NEAR(f(0.05), 0.15, 1e-15);
    EXPECT_NEAR(f(0.15), 0.4, 1e-15);
    EXPECT_EQ(f(0.3), 0.5);
}

TEST(SpeedError, KnownOffset) {
    const SampledFunction f{0.0, 0.001, std::vector<double>(601, 1.25), 1.0};
    const SpeedError e = speed_error(f, [](double) { return 1.0; }, 0.6);
    EXPECT_NEAR(e.linf, 0.25, 1e-15);
    EXPECT_NEAR(e.l2, 0.25 * std::sqrt(0.6), 1e-12);
}
