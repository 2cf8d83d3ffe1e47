#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bcinv/bcops.hpp"
#include "bcinv/error.hpp"
#include "bcinv/linalg.hpp"
#include "bcinv/parallel.hpp"
#include "bcinv/timegrid.hpp"

namespace bcinv {

/// How the PSD-distance gate eta enters the regularized inverse.
enum class CutoffMode {
    kRamp,  ///< multiply each window solution by eta(d, alpha)
    kOff,   ///< compute and report eta, but do not apply it
};

inline const char* to_string(CutoffMode m) { return m == CutoffMode::kRamp ? "ramp" : "off"; }

inline CutoffMode cutoff_mode_from_string(const std::string& s) {
    if (s == "ramp") return CutoffMode::kRamp;
    if (s == "off") return CutoffMode::kOff;
    throw ConfigError("unknown cutoff mode '" + s + "' (expected ramp or off)");
}

struct ZalphaConfig {
    double alpha = 1e-4;
    GmresOptions krylov{};
    CutoffMode cutoff = CutoffMode::kRamp;
    unsigned threads = 0;  ///< 0: hardware concurrency

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("ZalphaConfig: alpha must be positive");
        if (!(krylov.tol > 0.0)) throw ConfigError("ZalphaConfig: Krylov tolerance must be positive");
        if (krylov.max_outer < 1 || krylov.restart < 1) throw ConfigError("ZalphaConfig: Krylov sizes must be >= 1");
    }
};

/// Distance from the symmetric part of L to the positive semidefinite cone:
/// max(0, -lambda_min((L + L^T)/2)).
inline double psd_distance(const Matrix& l) {
    if (l.rows() != l.cols()) throw ConfigError("psd_distance: matrix must be square");
    if (l.rows() == 0) return 0.0;
    const Matrix sym = 0.5 * (l + l.transpose());
    return std::max(0.0, -min_eigenvalue_symmetric(sym));
}

/// Continuous gate: 1 on [0, alpha/4], 0 on [alpha/2, inf), linear between.
inline double eta_cutoff(double d, double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("eta_cutoff: alpha must be positive");
    if (!(d >= 0.0)) throw ConfigError("eta_cutoff: distance must be nonnegative");
    if (d <= 0.25 * alpha) return 1.0;
    if (d >= 0.5 * alpha) return 0.0;
    return 2.0 - 4.0 * d / alpha;
}

/// Outcome of one windowed solve (P_r A P_r + alpha) X = P_r rhs.
struct WindowSolve {
    Vector x;              ///< full-length coefficients, zero outside the window
    double eta = 1.0;      ///< gate value eta(d, alpha)
    double distance = 0.0; ///< PSD distance of the window block
    bool gated = false;    ///< eta < 1 and the gate was applied
    bool converged = true;
    double rel_residual = 0.0;
    int iterations = 0;
};

/// Solves (A_ww + alpha) x_w = rhs_w on the window w of a precomputed K^N L.
/// Outside the window P_r A P_r + alpha acts as alpha and P_r rhs vanishes,
/// so the solution is zero there.
inline WindowSolve solve_window_block(const Matrix& k_full, const Window& w, const Vector& rhs,
                                      const ZalphaConfig& cfg) {
    WindowSolve out;
    out.x = Vector::Zero(k_full.rows());
    if (w.count < 1) return out;
    const Matrix a = k_full.block(w.first, w.first, w.count, w.count);
    const Vector b = rhs.segment(w.first, w.count);
    const double alpha = cfg.alpha;
    auto apply = [&](const Vector& v) -> Vector { return a * v + alpha * v; };
    const GmresResult g = gmres(apply, b, cfg.krylov);
    out.converged = g.converged;
    out.rel_residual = g.rel_residual;
    out.iterations = g.iterations;
    out.distance = psd_distance(a);
    out.eta = eta_cutoff(out.distance, alpha);
    double factor = 1.0;
    if (cfg.cutoff == CutoffMode::kRamp) {
        factor = out.eta;
        out.gated = out.eta < 1.0;
    }
    out.x.segment(w.first, w.count) = factor * g.x;
    return out;
}

/// X = eta * (P_r K^N L P_r + alpha)^{-1} P_r rhs for grid-aligned r.
/// Without an explicit rhs the projection of b(t) = (T - t)_+ is used.
inline WindowSolve solve_windowed(const BcStack& stack, const Matrix& lnd, double r, const ZalphaConfig& cfg,
                                  const std::optional<Vector>& rhs = std::nullopt) {
    cfg.validate();
    const Window w = window_for(stack.grid(), r);
    const Vector b = rhs ? *rhs : b_coeffs(stack.grid());
    if (b.size() != stack.grid().cells()) throw ConfigError("solve_windowed: rhs length must be 2N");
    return solve_window_block(apply_K(stack, lnd), w, b, cfg);
}

/// Samples s(r_j) = <X_j, b>, r_j = jT/N, plus per-window diagnostics.
struct VolumeCurve {
    std::vector<double> radii;
    std::vector<double> values;
    std::vector<double> eta;
    std::vector<double> distance;
    std::vector<bool> converged;
    int gated_windows = 0;    ///< windows where eta < 1 was applied
    int would_gate = 0;       ///< windows with eta < 1, applied or not
    int unconverged = 0;      ///< windows whose Krylov solve missed the tolerance
    double max_rel_residual = 0.0;
};

inline VolumeCurve volume_curve(const BcStack& stack, const Matrix& lnd, const ZalphaConfig& cfg) {
    cfg.validate();
    const TimeGrid& grid = stack.grid();
    const int n = grid.N();
    const Matrix k = apply_K(stack, lnd);
    const Vector b = b_coeffs(grid);

    std::vector<WindowSolve> solves(static_cast<std::size_t>(n));
    parallel_for(
        n,
        [&](int idx) {
            const int j = idx + 1;
            solves[static_cast<std::size_t>(idx)] = solve_window_block(k, Window{n - j, j}, b, cfg);
        },
        cfg.threads);

    VolumeCurve vc;
    for (int idx = 0; idx < n; ++idx) {
        const WindowSolve& s = solves[static_cast<std::size_t>(idx)];
        const double value = s.x.dot(b);
        if (!std::isfinite(value)) throw NumericError("volume_curve: non-finite value at window " + std::to_string(idx + 1));
        vc.radii.push_back((idx + 1) * grid.h());
        vc.values.push_back(value);
        vc.eta.push_back(s.eta);
        vc.distance.push_back(s.distance);
        vc.converged.push_back(s.converged);
        if (s.gated) ++vc.gated_windows;
        if (s.eta < 1.0) ++vc.would_gate;
        if (!s.converged) ++vc.unconverged;
        vc.max_rel_residual = std::max(vc.max_rel_residual, s.rel_residual);
    }
    return vc;
}

}  // namespace bcinv
