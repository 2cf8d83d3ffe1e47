#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bcinv/bcops.hpp"
#include "bcinv/error.hpp"
#include "bcinv/forward.hpp"
#include "bcinv/ndmap.hpp"
#include "bcinv/profile.hpp"
#include "bcinv/reginv.hpp"
#include "bcinv/velocity.hpp"

namespace bcinv {

enum class HMode {
    kFixedGrid,    ///< h = T/N on the map's grid
    kTheoretical,  ///< h = c_h * eps^{p_h}
};

/// Parameter choice rules alpha(eps), nu(eps), h(eps) for the strategies.
struct Schedule {
    double c_reg = 1e-4;
    double p_alpha = 4.0 / 9.0;
    double c_nu = 0.01;
    double p_nu = 1.0 / 54.0;
    HMode h_mode = HMode::kFixedGrid;
    double c_h = 1.0;
    double p_h = 1.0 / 18.0;
    CutoffMode cutoff = CutoffMode::kRamp;
    GmresOptions krylov{};
    PriorBox box{};
    int eval_points = 1 << 11;
    unsigned threads = 0;

    void validate() const {
        if (!(c_reg > 0.0) || !(c_nu > 0.0) || !(c_h > 0.0)) throw ConfigError("Schedule: multipliers must be positive");
        for (double p : {p_alpha, p_nu, p_h}) {
            if (!(p > 0.0) || !(p < 1.0)) throw ConfigError("Schedule: exponents must lie in (0,1)");
        }
        if (eval_points < 16) throw ConfigError("Schedule: too few evaluation points");
    }

    double alpha(double eps) const { return c_reg * std::pow(eps, p_alpha); }
    double nu(double eps) const { return c_nu * std::pow(eps, p_nu); }
    double h(double eps, const TimeGrid& grid) const {
        return h_mode == HMode::kFixedGrid ? grid.h() : c_h * std::pow(eps, p_h);
    }
};

/// Parameters actually used by one reconstruction.
struct ReconParams {
    double alpha = 0.0;
    double h = 0.0;
    double nu = 0.0;
};

struct ReconResult {
    SampledFunction speed;   ///< c estimate on [0, L1 + 4 nu]; 1 beyond
    VolumeCurve volume;      ///< s(r_j)
    StepCurve derivative;    ///< D_h s
    StepCurve travel_speed;  ///< w = W(D_h s)
    ReconParams params;
    double eps = 0.0;        ///< noise level fed to the schedule
    int n = 0;               ///< resolution N of the map that was inverted
    std::vector<std::string> notes;
};

/// The chain Gamma_nu o Phi o W o D_h o S o Z_alpha o H on a given map.
inline ReconResult reconstruct_from_map(const NdMatrix& nd, const ReconParams& params, const Schedule& sched) {
    sched.validate();
    if (!(params.alpha > 0.0) || !(params.h > 0.0) || !(params.nu > 0.0)) {
        throw ConfigError("reconstruct: alpha, h and nu must be positive");
    }
    const TimeGrid& grid = nd.grid;
    const BcStack stack(grid);
    ZalphaConfig zcfg;
    zcfg.alpha = params.alpha;
    zcfg.krylov = sched.krylov;
    zcfg.cutoff = sched.cutoff;
    zcfg.threads = sched.threads;

    ReconResult out;
    out.params = params;
    out.n = grid.N();
    out.volume = volume_curve(stack, nd.mat, zcfg);
    if (out.volume.unconverged > 0) {
        out.notes.push_back(std::to_string(out.volume.unconverged) + " window solves stopped above the Krylov tolerance");
    }
    if (out.volume.would_gate > 0) {
        out.notes.push_back(std::to_string(out.volume.would_gate) + " windows had eta < 1 (cutoff " +
                            to_string(sched.cutoff) + ")");
    }
    if (params.h >= grid.T()) {
        out.params.h = 0.5 * grid.T();
        out.notes.push_back("difference step h = " + std::to_string(params.h) + " is not below T; using T/2");
    }
    out.derivative = dh_derivative(curve_interpolant(out.volume), out.params.h, grid.T());
    out.travel_speed = clamp_invert(out.derivative, sched.box.c0, sched.box.c1);
    const auto euclid = travel_to_euclid(out.travel_speed, sched.box.l0, sched.box.l1);
    const double x_end = sched.box.l1 + 4.0 * params.nu;
    out.speed = mollify(euclid, params.nu, 0.0, x_end, sched.eval_points, 1.0);
    return out;
}

/// Floor applied to a zero noise level, where the power-law schedule degenerates.
inline constexpr double kEpsFloor = 1e-12;

/// Multi-measurement strategy on a noisy ND map with operator-norm noise eps1.
inline ReconResult reconstruct_R1(const NdMatrix& nd, double eps1, const Schedule& sched) {
    if (!(eps1 >= 0.0)) throw ConfigError("reconstruct_R1: eps1 must be nonnegative");
    std::vector<std::string> pre;
    double eps = eps1;
    if (eps < kEpsFloor) {
        eps = kEpsFloor;
        pre.push_back("eps1 below 1e-12 replaced by 1e-12");
    }
    const ReconParams params{sched.alpha(eps), sched.h(eps, nd.grid), sched.nu(eps)};
    ReconResult out = reconstruct_from_map(nd, params, sched);
    out.eps = eps;
    out.notes.insert(out.notes.begin(), pre.begin(), pre.end());
    return out;
}

/// Single-measurement strategy: lift to P^{N0}, then run the chain with the
/// schedule evaluated at eps0^{1/5}, the operator-level accuracy of the lift
/// (so alpha = c_reg eps0^{4/45} and nu = c_nu eps0^{1/270}).
inline ReconResult reconstruct_R0(const SingleTrace& m, const Schedule& sched) {
    if (!(m.eps0 > 0.0)) throw ConfigError("reconstruct_R0: eps0 must be positive");
    const LiftResolution res = lift_resolution(m.eps0);
    const NdMatrix lifted = lift_single(m);
    const double eps_op = std::pow(m.eps0, 0.2);
    const ReconParams params{sched.alpha(eps_op), sched.h(eps_op, lifted.grid), sched.nu(eps_op)};
    ReconResult out = reconstruct_from_map(lifted, params, sched);
    out.eps = m.eps0;
    if (res.low_resolution) out.notes.insert(out.notes.begin(), "low resolution lift: N0 = " + std::to_string(res.n0));
    return out;
}

/// Converts an estimate to a profile the forward solver can use.
inline VelocityProfile to_profile(const SampledFunction& f, const PriorBox& box) {
    return {f.x0, f.dx, f.values, box};
}

// ---------------------------------------------------------------------------
// Discrepancy principle

struct MdpConfig {
    double h_tune = 1.1;
    double delta = 0.01;
    double log_alpha_lo = -9.0;
    double log_alpha_hi = 0.0;
    int max_iter = 40;

    void validate() const {
        if (!(h_tune > 1.0)) throw ConfigError("MdpConfig: h must exceed 1");
        if (!(delta > 0.0) || !(delta < h_tune - 1.0)) throw ConfigError("MdpConfig: need 0 < delta < h - 1");
        if (!(log_alpha_lo < log_alpha_hi)) throw ConfigError("MdpConfig: empty alpha bracket");
        if (max_iter < 1) throw ConfigError("MdpConfig: max_iter must be >= 1");
    }
};

/// Maps a speed profile to the P^N coordinates of its response to phi_{1,N}.
using PulseForward = std::function<Vector(const VelocityProfile&)>;

/// Forward handle built on solve_trace. The number of time steps is doubled
/// (up to max_n_sim) until the CFL bound holds for the candidate speed.
inline PulseForward make_pulse_forward(const TimeGrid& grid, const Simulation& base, int max_n_sim = 1 << 18) {
    return [grid, base, max_n_sim](const VelocityProfile& profile) -> Vector {
        Simulation sim = base;
        const double x_max = reflection_free_length(profile, sim);
        const double dx = x_max / sim.n_x;
        while (profile.max_speed() * (2.0 * sim.T / sim.n_sim) / dx > sim.cfl_limit) {
            if (sim.n_sim >= max_n_sim) throw ConfigError("pulse forward: CFL needs more than max_n_sim steps");
            sim.n_sim *= 2;
        }
        const TraceRecord tr = solve_trace(profile, Source::basis(grid, 1), sim);
        return project_trace(tr, grid).coeffs;
    };
}

struct MdpStep {
    double log_alpha = 0.0;
    double discrepancy = 0.0;  ///< NaN when the candidate was skipped
    std::string note;
};

struct MdpResult {
    bool feasible = false;
    double alpha = 0.0;
    double discrepancy = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
    std::optional<ReconResult> result;
    std::vector<MdpStep> trail;
    std::string reason;  ///< why the search was declared infeasible
};

/// Bisection on log10(alpha) for the band (h - delta) eps <= ||F(c_alpha) - y|| <= (h + delta) eps.
///
/// `nd` is the noisy map the reconstructions are computed from and `y` the
/// measured pulse response (its first column). A candidate whose
/// reconstruction or forward solve fails is logged in the trail and treated
/// as lying above the band.
inline MdpResult mdp_search(const NdMatrix& nd, const Vector& y, double eps, const PulseForward& forward,
                            const MdpConfig& cfg, const Schedule& sched) {
    cfg.validate();
    if (!(eps > 0.0)) throw ConfigError("mdp_search: eps must be positive");
    if (y.size() != nd.grid.cells()) throw ConfigError("mdp_search: data length must be 2N");
    MdpResult out;
    out.band_lo = (cfg.h_tune - cfg.delta) * eps;
    out.band_hi = (cfg.h_tune + cfg.delta) * eps;
    const double h = sched.h(eps, nd.grid);
    const double nu = sched.nu(eps);

    struct Eval {
        double d;
        std::optional<ReconResult> rec;
    };
    auto evaluate = [&](double log_alpha) -> Eval {
        MdpStep step{log_alpha, std::nan(""), ""};
        Eval ev{std::nan(""), std::nullopt};
        try {
            ReconResult rec = reconstruct_from_map(nd, {std::pow(10.0, log_alpha), h, nu}, sched);
            const Vector model = forward(to_profile(rec.speed, sched.box));
            ev.d = (model - y).norm();
            step.discrepancy = ev.d;
            rec.eps = eps;
            ev.rec = std::move(rec);
        } catch (const std::exception& e) {
            step.note = std::string("skipped: ") + e.what();
        }
        out.trail.push_back(step);
        return ev;
    };
    auto in_band = [&](double d) { return d >= out.band_lo && d <= out.band_hi; };
    auto accept = [&](double log_alpha, Eval& ev) {
        out.feasible = true;
        out.alpha = std::pow(10.0, log_alpha);
        out.discrepancy = ev.d;
        out.result = std::move(ev.rec);
    };

    // A failed candidate counts as lying above the band.
    auto value = [](const Eval& ev) { return std::isnan(ev.d) ? std::numeric_limits<double>::infinity() : ev.d; };

    double lo = cfg.log_alpha_lo;
    double hi = cfg.log_alpha_hi;
    Eval top = evaluate(hi);
    if (value(top) < out.band_lo) {
        out.reason = "discrepancy at the largest alpha is below the band";
        return out;
    }
    if (in_band(value(top))) {
        accept(hi, top);
        return out;
    }
    Eval bottom = evaluate(lo);
    if (value(bottom) > out.band_hi) {
        out.reason = "discrepancy at the smallest alpha is above the band";
        return out;
    }
    if (in_band(value(bottom))) {
        accept(lo, bottom);
        return out;
    }
    for (int it = 0; it < cfg.max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        Eval ev = evaluate(mid);
        const double d = value(ev);
        if (in_band(d)) {
            accept(mid, ev);
            break;
        }
        (d < out.band_lo ? lo : hi) = mid;
    }
    if (!out.feasible) {
        out.reason = "no alpha in the band after " + std::to_string(cfg.max_iter) + " bisection steps";
        return out;
    }
    // Re-verify the returned candidate against the band.
    if (!in_band(out.discrepancy)) throw NumericError("mdp_search: accepted alpha lies outside the band");
    return out;
}

}  // namespace bcinv
