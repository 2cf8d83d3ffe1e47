// Simulates the boundary response of a smooth speed bump, perturbs the ND map
// with 1% operator-norm noise and reconstructs the speed.

#include <cstdio>

#include "bcinv/bcinv.hpp"

int main() {
    using namespace bcinv;
    const double T = 0.6;
    const TimeGrid grid(T, 128);
    const PriorBox box{};
    const VelocityProfile truth = builtin_profile("smooth", box);

    const TraceRecord trace = solve_trace(truth, Source::basis(grid, 1), Simulation::desk(T));
    const NdMatrix clean = build_from_pulse(trace, grid);
    const CalibratedNoise noisy = add_noise_op_level(clean, 0.01, 7);

    Schedule sched;
    sched.cutoff = CutoffMode::kOff;
    const ReconResult rec = reconstruct_R1(noisy.noisy, noisy.eps1d, sched);
    const SpeedError err = speed_error(rec.speed, [&](double x) { return truth(x); }, box.l1);

    std::printf("noise %.4g  alpha %.3g  h %.4g  nu %.4g\n", noisy.eps1d, rec.params.alpha, rec.params.h,
                rec.params.nu);
    std::printf("%8s %10s %10s\n", "x", "c true", "c est");
    for (double x = 0.05; x < 0.6; x += 0.05) std::printf("%8.3f %10.4f %10.4f\n", x, truth(x), rec.speed(x));
    std::printf("L2 error %.4g, max error on (0, L1) %.4g\n", err.l2, err.linf);
    return 0;
}
