#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "bcinv/profiles.hpp"
#include "bcinv/strategy.hpp"
#include "oracles.hpp"

using namespace bcinv;

namespace {

NdMatrix unit_map(int n) {
    const TimeGrid g(0.6, n);
    return NdMatrix::from_generator(g, oracle::unit_speed_generator(g));
}

SingleTrace unit_single_trace(double eps0) {
    const TimeGrid grid(0.6, 256);
    return {grid, project_trace(analytic_trace_constant(Source::step(), TimeGrid(0.6, 2048)), grid).coeffs, eps0};
}

double linf_from_one(const SampledFunction& f) {
    return speed_error(f, [](double) { return 1.0; }, 0.6).linf;
}

}  // namespace

TEST(Schedule, ReferenceValues) {
    const Schedule s;
    EXPECT_NEAR(s.alpha(0.01), 1.29155e-5, 1e-3 * 1.29155e-5);
    EXPECT_NEAR(s.nu(0.01), 9.18254e-3, 1e-3 * 9.18254e-3);
    const TimeGrid g(0.6, 128);
    EXPECT_EQ(s.h(0.01, g), g.h());
    Schedule th;
    th.h_mode = HMode::kTheoretical;
    EXPECT_NEAR(th.h(0.01, g), std::pow(0.01, 1.0 / 18.0), 1e-15);
}

TEST(Schedule, MonotoneInNoiseLevel) {
    const Schedule s;
    double prev_a = 0.0;
    double prev_n = 0.0;
    for (double e = 1e-8; e < 1.0; e *= 1.7) {
        EXPECT_GT(s.alpha(e), prev_a);
        EXPECT_GT(s.nu(e), prev_n);
        prev_a = s.alpha(e);
        prev_n = s.nu(e);
    }
}

TEST(Schedule, ValidationRejectsBadExponents) {
    Schedule s;
    s.p_alpha = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
    s = Schedule{};
    s.c_reg = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(ReconstructR1, UnitSpeedNearlyNoiseFree) {
    const ReconResult r = reconstruct_R1(unit_map(128), 1e-6, Schedule{});
    EXPECT_LE(linf_from_one(r.speed), 0.05);
    EXPECT_EQ(r.n, 128);
    EXPECT_EQ(r.eps, 1e-6);
    // Outside the sampled range the estimate is the background speed.
    EXPECT_EQ(r.speed(5.0), 1.0);
}

TEST(ReconstructR1, ZeroNoiseUsesFloor) {
    const ReconResult r = reconstruct_R1(unit_map(32), 0.0, Schedule{});
    EXPECT_EQ(r.eps, kEpsFloor);
    ASSERT_FALSE(r.notes.empty());
    EXPECT_NE(r.notes.front().find("1e-12"), std::string::npos);
    EXPECT_THROW(reconstruct_R1(unit_map(32), -1.0, Schedule{}), ConfigError);
}

TEST(ReconstructR1, DeterministicAcrossThreadCounts) {
    const NdMatrix nd = add_noise(unit_map(64), 0.02, 4);
    Schedule one;
    one.threads = 1;
    Schedule many;
    many.threads = 3;
    const ReconResult a = reconstruct_R1(nd, 0.02, one);
    const ReconResult b = reconstruct_R1(nd, 0.02, many);
    EXPECT_EQ(a.speed.values, b.speed.values);
    EXPECT_EQ(a.volume.values, b.volume.values);
}

TEST(ReconstructR1, SpeedStaysInsideClampRange) {
    Schedule s;
    s.cutoff = CutoffMode::kOff;
    const ReconResult r = reconstruct_R1(add_noise(unit_map(64), 0.05, 9), 0.05, s);
    // Phi and the mollifier keep values inside the range of the clamped inverse.
    for (double v : r.speed.values) {
        EXPECT_GE(v, 1.0 / s.box.c1 - 1e-12);
        EXPECT_LE(v, 1.0 / s.box.c0 + 1e-12);
    }
    for (double v : r.travel_speed.values) {
        EXPECT_GE(v, 1.0 / s.box.c1 - 1e-12);
        EXPECT_LE(v, 1.0 / s.box.c0 + 1e-12);
    }
}

TEST(ReconstructR0, UnitSpeed) {
    const ReconResult r = reconstruct_R0(unit_single_trace(std::pow(2.0, -4)), Schedule{});
    EXPECT_EQ(r.n, 4);
    EXPECT_LE(linf_from_one(r.speed), 0.05);
}

TEST(ReconstructR0, MatchesR1OnLiftedMap) {
    const SingleTrace m = unit_single_trace(std::pow(2.0, -10));
    const ReconResult r0 = reconstruct_R0(m, Schedule{});
    const NdMatrix lifted = lift_single(m);
    EXPECT_EQ(lifted.grid.N(), 32);
    const ReconResult r1 = reconstruct_R1(lifted, std::pow(m.eps0, 0.2), Schedule{});
    ASSERT_EQ(r0.speed.values.size(), r1.speed.values.size());
    for (std::size_t i = 0; i < r0.speed.values.size(); ++i) {
        EXPECT_NEAR(r0.speed.values[i], r1.speed.values[i], 1e-9);
    }
    EXPECT_EQ(r0.eps, m.eps0);
}

TEST(ReconstructR0, LowResolutionNote) {
    const ReconResult r = reconstruct_R0(unit_single_trace(0.9), Schedule{});
    ASSERT_FALSE(r.notes.empty());
    EXPECT_NE(r.notes.front().find("low resolution"), std::string::npos);
    EXPECT_EQ(r.n, 1);
    EXPECT_TRUE(std::isfinite(r.speed.values.front()));
    EXPECT_THROW(reconstruct_R0(unit_single_trace(0.0), Schedule{}), ConfigError);
}

TEST(ReconstructR1, TheoreticalStepIsCappedBelowHorizon) {
    Schedule s;
    s.h_mode = HMode::kTheoretical;
    const ReconResult r = reconstruct_R1(unit_map(32), 0.01, s);
    EXPECT_EQ(r.params.h, 0.3);
    bool noted = false;
    for (const auto& n : r.notes) noted = noted || n.find("using T/2") != std::string::npos;
    EXPECT_TRUE(noted);
}

TEST(ReconstructFromMap, RejectsNonPositiveParameters) {
    EXPECT_THROW(reconstruct_from_map(unit_map(8), {0.0, 0.1, 0.1}, Schedule{}), ConfigError);
    EXPECT_THROW(reconstruct_from_map(unit_map(8), {1e-3, 0.1, -1.0}, Schedule{}), ConfigError);
}

class MdpSearch : public ::testing::Test {
protected:
    void SetUp() override {
        forward = make_pulse_forward(grid, Simulation{0.6, 256, 1024});
        clean = NdMatrix::from_generator(grid, forward(builtin_profile("smooth")));
        noise = add_noise_op_level(clean, 0.02, 1);
        sched.cutoff = CutoffMode::kOff;
        cfg.max_iter = 20;
    }

    TimeGrid grid{0.6, 32};
    PulseForward forward;
    NdMatrix clean = NdMatrix::from_generator(grid, Vector::Zero(64));
    CalibratedNoise noise{clean, 0.0, 0.0};
    Schedule sched;
    MdpConfig cfg;
};

TEST_F(MdpSearch, FeasibleResultLiesInBand) {
    const MdpResult r = mdp_search(noise.noisy, noise.noisy.generator, noise.eps1d, forward, cfg, sched);
    EXPECT_FALSE(r.trail.empty());
    EXPECT_NEAR(r.band_lo, (cfg.h_tune - cfg.delta) * noise.eps1d, 1e-15);
    EXPECT_NEAR(r.band_hi, (cfg.h_tune + cfg.delta) * noise.eps1d, 1e-15);
    if (r.feasible) {
        EXPECT_GE(r.discrepancy, r.band_lo);
        EXPECT_LE(r.discrepancy, r.band_hi);
        EXPECT_GE(std::log10(r.alpha), cfg.log_alpha_lo - 1e-12);
        EXPECT_LE(std::log10(r.alpha), cfg.log_alpha_hi + 1e-12);
        ASSERT_TRUE(r.result.has_value());
        EXPECT_NEAR(r.result->params.alpha, r.alpha, 1e-15 * r.alpha);
    } else {
        EXPECT_FALSE(r.reason.empty());
    }
}

TEST_F(MdpSearch, HugeNoiseIsInfeasibleBelowBand) {
    const MdpResult r = mdp_search(noise.noisy, noise.noisy.generator, 1e3, forward, cfg, sched);
    EXPECT_FALSE(r.feasible);
    EXPECT_NE(r.reason.find("below"), std::string::npos);
    EXPECT_EQ(r.trail.size(), 1u);
}

TEST_F(MdpSearch, FailingForwardIsSkippedNotFatal) {
    const PulseForward broken = [](const VelocityProfile&) -> Vector { throw std::runtime_error("solver down"); };
    const MdpResult r = mdp_search(noise.noisy, noise.noisy.generator, noise.eps1d, broken, cfg, sched);
    EXPECT_FALSE(r.feasible);
    ASSERT_FALSE(r.trail.empty());
    for (const auto& step : r.trail) {
        EXPECT_TRUE(std::isnan(step.discrepancy));
        EXPECT_EQ(step.note.rfind("skipped", 0), 0u);
    }
}

TEST_F(MdpSearch, RejectsBadInputs) {
    EXPECT_THROW(mdp_search(noise.noisy, noise.noisy.generator, 0.0, forward, cfg, sched), ConfigError);
    EXPECT_THROW(mdp_search(noise.noisy, Vector::Zero(3), 0.01, forward, cfg, sched), ConfigError);
    MdpConfig bad = cfg;
    bad.delta = 0.5;
    EXPECT_THROW(mdp_search(noise.noisy, noise.noisy.generator, 0.01, forward, bad, sched), ConfigError);
}
