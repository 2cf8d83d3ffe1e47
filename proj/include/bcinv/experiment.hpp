#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "bcinv/error.hpp"
#include "bcinv/forward.hpp"
#include "bcinv/io.hpp"
#include "bcinv/ndmap.hpp"
#include "bcinv/parallel.hpp"
#include "bcinv/profile.hpp"
#include "bcinv/profiles.hpp"
#include "bcinv/strategy.hpp"

namespace bcinv {

/// Everything an experiment run depends on. Construct with from_keys() so
/// that defaults, the paper-scale switch and validation are applied.
struct ExperimentConfig {
    double T = 0.6;
    int N1 = 1 << 7;
    int n_x = 1 << 10;
    int n_sim = 1 << 12;
    PriorBox box{};
    std::string profile = "smooth";
    std::string profile_file;
    std::string calibration_profile = "calibration";
    std::vector<double> noise_levels = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    Schedule schedule = experiment_schedule();
    std::vector<double> creg_grid = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9};
    MdpConfig mdp{};
    std::string output_dir = "out";
    // Inputs of the single-step commands.
    std::string input;       ///< trace, ND map or single-trace file
    double eps = 0.0;        ///< noise level (add-noise target, reconstruct schedule level, single-trace eps0)

    /// Schedule defaults for experiments: the PSD gate is reported, not applied.
    static Schedule experiment_schedule() {
        Schedule s;
        s.cutoff = CutoffMode::kOff;
        return s;
    }

    static const std::vector<std::string>& known_keys() {
        static const std::vector<std::string> keys = {
            "T", "N1", "n_x", "n_sim", "C0", "C1", "L0", "L1", "profile", "profile_file", "calibration_profile",
            "noise_levels", "seeds", "c_reg", "p_alpha", "c_nu", "p_nu", "h_mode", "c_h", "p_h", "cutoff",
            "gmres_outer", "gmres_restart", "gmres_tol", "eval_points", "threads", "creg_grid", "mdp_h",
            "mdp_delta", "mdp_log_alpha_lo", "mdp_log_alpha_hi", "mdp_max_iter", "output_dir", "input", "eps"};
        return keys;
    }

    static ExperimentConfig from_keys(const KeyValueConfig& kv, bool paper_scale = false) {
        const auto unknown = kv.unknown_keys(known_keys());
        if (!unknown.empty()) throw ConfigError("unknown config key '" + unknown.front() + "'");
        ExperimentConfig c;
        if (paper_scale) {
            c.N1 = 1 << 10;
            c.n_x = 1 << 13;
            c.n_sim = 1 << 15;
        }
        c.T = kv.real("T", c.T);
        c.N1 = static_cast<int>(kv.integer("N1", c.N1));
        c.n_x = static_cast<int>(kv.integer("n_x", c.n_x));
        c.n_sim = static_cast<int>(kv.integer("n_sim", c.n_sim));
        c.box.c0 = kv.real("C0", c.box.c0);
        c.box.c1 = kv.real("C1", c.box.c1);
        c.box.l0 = kv.real("L0", c.box.l0);
        c.box.l1 = kv.real("L1", c.box.l1);
        c.profile = kv.str("profile", c.profile);
        c.profile_file = kv.str("profile_file", c.profile_file);
        c.calibration_profile = kv.str("calibration_profile", c.calibration_profile);
        c.noise_levels = kv.reals("noise_levels", c.noise_levels);
        if (kv.has("seeds")) {
            c.seeds.clear();
            for (double s : kv.reals("seeds", {})) {
                if (s < 0.0 || s != std::floor(s)) throw ConfigError("config key 'seeds': expected nonnegative integers");
                c.seeds.push_back(static_cast<std::uint64_t>(s));
            }
        }
        Schedule& s = c.schedule;
        s.c_reg = kv.real("c_reg", s.c_reg);
        s.p_alpha = kv.real("p_alpha", s.p_alpha);
        s.c_nu = kv.real("c_nu", s.c_nu);
        s.p_nu = kv.real("p_nu", s.p_nu);
        const std::string hm = kv.str("h_mode", s.h_mode == HMode::kFixedGrid ? "fixed" : "theoretical");
        if (hm == "fixed") {
            s.h_mode = HMode::kFixedGrid;
        } else if (hm == "theoretical") {
            s.h_mode = HMode::kTheoretical;
        } else {
            throw ConfigError("config key 'h_mode': expected fixed or theoretical");
        }
        s.c_h = kv.real("c_h", s.c_h);
        s.p_h = kv.real("p_h", s.p_h);
        s.cutoff = cutoff_mode_from_string(kv.str("cutoff", to_string(s.cutoff)));
        s.krylov.max_outer = static_cast<int>(kv.integer("gmres_outer", s.krylov.max_outer));
        s.krylov.restart = static_cast<int>(kv.integer("gmres_restart", s.krylov.restart));
        s.krylov.tol = kv.real("gmres_tol", s.krylov.tol);
        s.eval_points = static_cast<int>(kv.integer("eval_points", s.eval_points));
        const long long threads = kv.integer("threads", s.threads);
        if (threads < 0) throw ConfigError("config key 'threads' must be nonnegative");
        s.threads = static_cast<unsigned>(threads);
        c.creg_grid = kv.reals("creg_grid", c.creg_grid);
        c.mdp.h_tune = kv.real("mdp_h", c.mdp.h_tune);
        c.mdp.delta = kv.real("mdp_delta", c.mdp.delta);
        c.mdp.log_alpha_lo = kv.real("mdp_log_alpha_lo", c.mdp.log_alpha_lo);
        c.mdp.log_alpha_hi = kv.real("mdp_log_alpha_hi", c.mdp.log_alpha_hi);
        c.mdp.max_iter = static_cast<int>(kv.integer("mdp_max_iter", c.mdp.max_iter));
        c.output_dir = kv.str("output_dir", c.output_dir);
        c.input = kv.str("input", c.input);
        c.eps = kv.real("eps", c.eps);
        c.validate();
        return c;
    }

    void validate() const {
        if (!(T > 0.0)) throw ConfigError("T must be positive");
        if (!is_power_of_two(N1)) throw ConfigError("N1 must be a power of two");
        if (!is_power_of_two(n_sim) || !is_power_of_two(n_x)) throw ConfigError("n_x and n_sim must be powers of two");
        if ((n_sim / 2) % N1 != 0) throw ConfigError("n_sim must be a multiple of 2 N1");
        if (!(box.c0 > 0.0) || !(box.c0 < box.c1)) throw ConfigError("need 0 < C0 < C1");
        if (!(box.l0 > 0.0) || !(box.l0 < box.l1)) throw ConfigError("need 0 < L0 < L1");
        for (double e : noise_levels) {
            if (!(e > 0.0)) throw ConfigError("noise levels must be positive");
        }
        if (noise_levels.empty()) throw ConfigError("noise_levels must not be empty");
        if (seeds.empty()) throw ConfigError("seeds must not be empty");
        for (double c : creg_grid) {
            if (!(c > 0.0)) throw ConfigError("creg_grid entries must be positive");
        }
        if (!(eps >= 0.0)) throw ConfigError("eps must be nonnegative");
        if (!profile_file.empty() && !std::filesystem::exists(profile_file)) {
            throw ConfigError("profile file not found: " + profile_file);
        }
        if (profile_file.empty()) builtin_speed(profile);
        builtin_speed(calibration_profile);
        schedule.validate();
        mdp.validate();
    }

    TimeGrid grid() const { return TimeGrid(T, N1); }
    Simulation simulation() const { return Simulation{T, n_x, n_sim}; }

    /// The profile under study: the file if one is given, else the built-in id.
    VelocityProfile load_profile() const {
        VelocityProfile p = profile_file.empty() ? builtin_profile(profile, box) : read_profile_file(profile_file, box);
        p.validate();
        return p;
    }

    VelocityProfile load_calibration_profile() const {
        VelocityProfile p = builtin_profile(calibration_profile, box);
        p.validate();
        return p;
    }

    /// Resolved settings as sorted key/value pairs.
    std::map<std::string, std::string> canonical() const {
        std::map<std::string, std::string> m;
        auto join = [](const auto& xs) {
            std::string out;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                if (i) out += ",";
                if constexpr (std::is_floating_point_v<std::decay_t<decltype(xs[i])>>) {
                    out += num(xs[i]);
                } else {
                    out += std::to_string(xs[i]);
                }
            }
            return out;
        };
        m["T"] = num(T);
        m["N1"] = std::to_string(N1);
        m["n_x"] = std::to_string(n_x);
        m["n_sim"] = std::to_string(n_sim);
        m["C0"] = num(box.c0);
        m["C1"] = num(box.c1);
        m["L0"] = num(box.l0);
        m["L1"] = num(box.l1);
        m["profile"] = profile;
        m["profile_file"] = profile_file;
        m["calibration_profile"] = calibration_profile;
        m["noise_levels"] = join(noise_levels);
        m["seeds"] = join(seeds);
        m["c_reg"] = num(schedule.c_reg);
        m["p_alpha"] = num(schedule.p_alpha);
        m["c_nu"] = num(schedule.c_nu);
        m["p_nu"] = num(schedule.p_nu);
        m["h_mode"] = schedule.h_mode == HMode::kFixedGrid ? "fixed" : "theoretical";
        m["c_h"] = num(schedule.c_h);
        m["p_h"] = num(schedule.p_h);
        m["cutoff"] = to_string(schedule.cutoff);
        m["gmres_outer"] = std::to_string(schedule.krylov.max_outer);
        m["gmres_restart"] = std::to_string(schedule.krylov.restart);
        m["gmres_tol"] = num(schedule.krylov.tol);
        m["eval_points"] = std::to_string(schedule.eval_points);
        m["creg_grid"] = join(creg_grid);
        m["mdp_h"] = num(mdp.h_tune);
        m["mdp_delta"] = num(mdp.delta);
        m["mdp_log_alpha_lo"] = num(mdp.log_alpha_lo);
        m["mdp_log_alpha_hi"] = num(mdp.log_alpha_hi);
        m["mdp_max_iter"] = std::to_string(mdp.max_iter);
        m["input"] = input;
        m["eps"] = num(eps);
        return m;
    }

    /// FNV-1a over the canonical settings. Thread count and output directory
    /// do not change results and are left out.
    std::string hash() const {
        std::string text;
        for (const auto& kv : canonical()) text += kv.first + "=" + kv.second + "\n";
        return hex64(fnv1a64(text));
    }
};

/// Metrics of one reconstruction run.
struct RunRecord {
    std::string config_hash;
    double eps = 0.0;           ///< target noise level
    std::uint64_t seed = 0;
    double eps_measured = 0.0;  ///< operator-norm size of the injected noise
    double l2 = 0.0;
    double linf = 0.0;
    double alpha = 0.0;
    double nu = 0.0;
    double h = 0.0;
    double runtime_s = 0.0;
    int would_gate = 0;
    int unconverged = 0;
    std::string artifact;

    bool finite() const {
        for (double v : {eps, eps_measured, l2, linf, alpha, nu, h, runtime_s}) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Building blocks

/// Simulated ND map of a profile: the boundary response to phi_{1,N1}.
struct SimulatedMap {
    TraceRecord trace;
    NdMatrix nd;
};

inline SimulatedMap simulate_map(const VelocityProfile& profile, const ExperimentConfig& cfg) {
    const TimeGrid grid = cfg.grid();
    TraceRecord trace = solve_trace(profile, Source::basis(grid, 1), cfg.simulation());
    NdMatrix nd = build_from_pulse(trace, grid);
    return {std::move(trace), std::move(nd)};
}

/// One noisy R1 reconstruction scored against the true profile.
struct ScoredRun {
    RunRecord record;
    ReconResult result;
};

inline ScoredRun scored_R1(const NdMatrix& clean, const VelocityProfile& truth, double eps, std::uint64_t seed,
                           const Schedule& sched, double l1) {
    const auto t0 = std::chrono::steady_clock::now();
    const CalibratedNoise noisy = add_noise_op_level(clean, eps, seed);
    ReconResult rec = reconstruct_R1(noisy.noisy, noisy.eps1d, sched);
    const SpeedError err = speed_error(rec.speed, [&truth](double x) { return truth(x); }, l1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    RunRecord r;
    r.eps = eps;
    r.seed = seed;
    r.eps_measured = noisy.eps1d;
    r.l2 = err.l2;
    r.linf = err.linf;
    r.alpha = rec.params.alpha;
    r.nu = rec.params.nu;
    r.h = rec.params.h;
    r.runtime_s = secs;
    r.would_gate = rec.volume.would_gate;
    r.unconverged = rec.volume.unconverged;
    return {r, std::move(rec)};
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_slope: need at least two points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw NumericError("loglog_slope: nonpositive value");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw ConfigError("loglog_slope: x values must not all coincide");
    return sxy / sxx;
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg, const std::string& command) {
    std::ofstream out(dir / "manifest.txt");
    out << "# command = " << command << "\n";
    out << "# config_hash = " << cfg.hash() << "\n";
    for (const auto& kv : cfg.canonical()) out << kv.first << " = " << kv.second << "\n";
}

inline void write_speed_csv(const std::filesystem::path& path, const SampledFunction& f,
                            const std::function<double(double)>* truth = nullptr) {
    CsvWriter csv(path, truth ? std::vector<std::string>{"x", "c", "c_true"} : std::vector<std::string>{"x", "c"});
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (truth) {
            csv.row({num(f.x(i)), num(f.values[i]), num((*truth)(f.x(i)))});
        } else {
            csv.row({num(f.x(i)), num(f.values[i])});
        }
    }
}

inline void write_curves_csv(const std::filesystem::path& dir, const ReconResult& rec) {
    CsvWriter vol(dir / "volume.csv", {"r", "s", "eta", "psd_distance", "converged"});
    for (std::size_t i = 0; i < rec.volume.radii.size(); ++i) {
        vol.row({num(rec.volume.radii[i]), num(rec.volume.values[i]), num(rec.volume.eta[i]),
                 num(rec.volume.distance[i]), rec.volume.converged[i] ? "1" : "0"});
    }
    CsvWriter der(dir / "derivative.csv", {"t_left", "t_right", "dh_s", "w"});
    for (std::size_t i = 0; i < rec.derivative.cells(); ++i) {
        der.row({num(rec.derivative.edges[i]), num(rec.derivative.edges[i + 1]), num(rec.derivative.values[i]),
                 num(rec.travel_speed.values[i])});
    }
}

inline void plot_speed(const std::filesystem::path& path, const SampledFunction& est,
                       const std::function<double(double)>* truth, const std::string& title) {
    PlotSpec spec;
    spec.title = title;
    spec.xlabel = "x";
    spec.ylabel = "c(x)";
    PlotSeries s{"estimate", {}, {}};
    PlotSeries t{"true", {}, {}, false, true};
    for (std::size_t i = 0; i < est.values.size(); ++i) {
        s.x.push_back(est.x(i));
        s.y.push_back(est.values[i]);
        if (truth) {
            t.x.push_back(est.x(i));
            t.y.push_back((*truth)(est.x(i)));
        }
    }
    spec.series.push_back(std::move(s));
    if (truth) spec.series.push_back(std::move(t));
    write_svg_plot(path, spec);
}

// ---------------------------------------------------------------------------
// Commands. Each writes its artifacts under cfg.output_dir and logs a short
// summary to `log`.

inline void cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    const VelocityProfile profile = cfg.load_profile();
    const SimulatedMap sim = simulate_map(profile, cfg);
    const auto dir = prepare_dir(cfg.output_dir);
    {
        std::ofstream out(dir / "trace.csv");
        write_trace_csv(sim.trace, out);
    }
    {
        std::ofstream out(dir / "ndmap.csv");
        write_ndmap(sim.nd, out);
    }
    write_manifest(dir, cfg, "simulate");
    log << "simulate: N1=" << cfg.N1 << " n_x=" << cfg.n_x << " n_sim=" << cfg.n_sim << " -> "
        << (dir / "ndmap.csv").string() << "\n";
}

inline void cmd_build_ndmap(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.input.empty()) throw ConfigError("build-ndmap needs an input trace file");
    std::ifstream in(cfg.input);
    if (!in) throw ConfigError("cannot open trace file: " + cfg.input);
    const TraceRecord trace = read_trace_csv(in);
    const NdMatrix nd = build_from_pulse(trace, cfg.grid());
    const auto dir = prepare_dir(cfg.output_dir);
    std::ofstream out(dir / "ndmap.csv");
    write_ndmap(nd, out);
    log << "build-ndmap: N=" << nd.grid.N() << " -> " << (dir / "ndmap.csv").string() << "\n";
}

inline NdMatrix load_ndmap_input(const ExperimentConfig& cfg, const char* command) {
    if (cfg.input.empty()) throw ConfigError(std::string(command) + " needs an input ND map file");
    std::ifstream in(cfg.input);
    if (!in) throw ConfigError("cannot open ND map file: " + cfg.input);
    return read_ndmap(in);
}

inline void cmd_add_noise(const ExperimentConfig& cfg, std::uint64_t seed, std::ostream& log) {
    const NdMatrix nd = load_ndmap_input(cfg, "add-noise");
    if (!(cfg.eps > 0.0)) throw ConfigError("add-noise needs eps > 0");
    const CalibratedNoise noisy = add_noise_op_level(nd, cfg.eps, seed);
    const auto dir = prepare_dir(cfg.output_dir);
    {
        std::ofstream out(dir / "ndmap_noisy.csv");
        write_ndmap(noisy.noisy, out);
    }
    CsvWriter csv(dir / "noise.csv", {"eps_target", "seed", "eps0d", "eps1d"});
    csv.row({num(cfg.eps), std::to_string(seed), num(noisy.eps0d), num(noisy.eps1d)});
    log << "add-noise: eps1 target " << cfg.eps << ", measured " << noisy.eps1d << ", generator l2 " << noisy.eps0d
        << "\n";
}

inline void report_notes(const ReconResult& rec, std::ostream& log) {
    for (const auto& n : rec.notes) log << "  note: " << n << "\n";
}

inline void cmd_reconstruct(const ExperimentConfig& cfg, std::ostream& log) {
    const NdMatrix nd = load_ndmap_input(cfg, "reconstruct");
    const ReconResult rec = reconstruct_R1(nd, cfg.eps, cfg.schedule);
    const auto dir = prepare_dir(cfg.output_dir);
    write_speed_csv(dir / "speed.csv", rec.speed);
    write_curves_csv(dir, rec);
    plot_speed(dir / "speed.svg", rec.speed, nullptr, "Reconstructed speed");
    write_manifest(dir, cfg, "reconstruct");
    log << "reconstruct: alpha=" << rec.params.alpha << " h=" << rec.params.h << " nu=" << rec.params.nu << "\n";
    report_notes(rec, log);
}

/// Reconstruct-single reads a single-trace file when `input` is set;
/// otherwise it simulates the step response of the configured profile and
/// adds noise of size eps (the seed picks the direction).
inline void cmd_reconstruct_single(const ExperimentConfig& cfg, std::uint64_t seed, std::ostream& log) {
    std::optional<VelocityProfile> truth;
    const SingleTrace m = [&]() {
        if (!cfg.input.empty()) {
            std::ifstream in(cfg.input);
            if (!in) throw ConfigError("cannot open single-trace file: " + cfg.input);
            return read_single_trace(in);
        }
        if (!(cfg.eps > 0.0)) throw ConfigError("reconstruct-single needs eps > 0");
        truth = cfg.load_profile();
        const TraceRecord step = solve_trace(*truth, Source::step(), cfg.simulation());
        return make_single_trace(step, cfg.grid(), cfg.eps, seed);
    }();
    const ReconResult rec = reconstruct_R0(m, cfg.schedule);
    const auto dir = prepare_dir(cfg.output_dir);
    std::function<double(double)> truth_fn;
    if (truth) truth_fn = [&truth](double x) { return (*truth)(x); };
    write_speed_csv(dir / "speed.csv", rec.speed, truth ? &truth_fn : nullptr);
    write_curves_csv(dir, rec);
    plot_speed(dir / "speed.svg", rec.speed, truth ? &truth_fn : nullptr, "Single-measurement reconstruction");
    if (cfg.input.empty()) {
        std::ofstream out(dir / "single_trace.csv");
        write_single_trace(m, out);
    }
    write_manifest(dir, cfg, "reconstruct-single");
    log << "reconstruct-single: eps0=" << m.eps0 << " N0=" << rec.n << " alpha=" << rec.params.alpha
        << " nu=" << rec.params.nu;
    if (truth) log << " L2 error=" << speed_error(rec.speed, truth_fn, cfg.box.l1).l2;
    log << "\n";
    report_notes(rec, log);
}

// --- calibration -----------------------------------------------------------

struct CalibrationCell {
    double c_reg = 0.0;
    double eps = 0.0;
    double mean_l2 = std::nan("");
    int runs_ok = 0;
    std::string error;
};

struct CalibrationReport {
    std::vector<CalibrationCell> cells;  ///< c_reg-major, noise levels inner
    double selected_c_reg = std::nan("");

    /// Cell lookup; throws if absent.
    const CalibrationCell& at(double c_reg, double eps) const {
        for (const auto& c : cells) {
            if (c.c_reg == c_reg && c.eps == eps) return c;
        }
        throw ConfigError("calibration cell not found");
    }
};

/// Error for each (c_reg, eps) pair against `truth`, averaged over seeds.
/// The c_reg with the smallest worst-case mean error is selected.
inline CalibrationReport run_calibration(const ExperimentConfig& cfg, const VelocityProfile& truth,
                                         const NdMatrix& clean) {
    CalibrationReport rep;
    for (double c : cfg.creg_grid) {
        for (double e : cfg.noise_levels) rep.cells.push_back({c, e, std::nan(""), 0, {}});
    }
    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<double> errs(rep.cells.size() * n_seeds, std::nan(""));
    std::vector<std::string> fails(errs.size());
    Schedule sched = cfg.schedule;
    sched.threads = 1;
    parallel_for(
        static_cast<int>(errs.size()),
        [&](int k) {
            const auto& cell = rep.cells[static_cast<std::size_t>(k) / n_seeds];
            Schedule s = sched;
            s.c_reg = cell.c_reg;
            try {
                errs[static_cast<std::size_t>(k)] =
                    scored_R1(clean, truth, cell.eps, cfg.seeds[static_cast<std::size_t>(k) % n_seeds], s, cfg.box.l1)
                        .record.l2;
            } catch (const std::exception& e) {
                fails[static_cast<std::size_t>(k)] = e.what();
            }
        },
        cfg.schedule.threads);
    for (std::size_t i = 0; i < rep.cells.size(); ++i) {
        auto& cell = rep.cells[i];
        double acc = 0.0;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const double v = errs[i * n_seeds + s];
            if (std::isfinite(v)) {
                acc += v;
                ++cell.runs_ok;
            } else if (cell.error.empty()) {
                cell.error = fails[i * n_seeds + s].empty() ? "non-finite error" : fails[i * n_seeds + s];
            }
        }
        if (cell.runs_ok == static_cast<int>(n_seeds)) cell.mean_l2 = acc / static_cast<double>(n_seeds);
    }
    double best = INFINITY;
    for (double c : cfg.creg_grid) {
        double worst = 0.0;
        for (double e : cfg.noise_levels) {
            const double v = rep.at(c, e).mean_l2;
            worst = std::isfinite(v) ? std::max(worst, v) : INFINITY;
        }
        if (worst < best) {
            best = worst;
            rep.selected_c_reg = c;
        }
    }
    return rep;
}

inline void cmd_calibrate(const ExperimentConfig& cfg, std::ostream& log) {
    const VelocityProfile truth = cfg.load_calibration_profile();
    const SimulatedMap sim = simulate_map(truth, cfg);
    const CalibrationReport rep = run_calibration(cfg, truth, sim.nd);
    const auto dir = prepare_dir(cfg.output_dir);
    const std::string hash = cfg.hash();
    CsvWriter csv(dir / "calibration.csv", {"config_hash", "c_reg", "eps", "mean_l2", "runs_ok", "status"});
    for (const auto& c : rep.cells) {
        csv.row({hash, num(c.c_reg), num(c.eps), num(c.mean_l2), std::to_string(c.runs_ok),
                 c.error.empty() ? "ok" : "failed"});
    }
    PlotSpec spec{"Calibration: error against c_reg", "c_reg", "mean L2 error", true, true, {}};
    for (double e : cfg.noise_levels) {
        PlotSeries s{"eps=" + detail::tick_label(e), {}, {}, true};
        for (double c : cfg.creg_grid) {
            s.x.push_back(c);
            s.y.push_back(rep.at(c, e).mean_l2);
        }
        spec.series.push_back(std::move(s));
    }
    write_svg_plot(dir / "calibration.svg", spec);
    write_manifest(dir, cfg, "calibrate");
    log << "calibrate: " << rep.cells.size() << " cells, selected c_reg = " << rep.selected_c_reg << "\n";
    for (const auto& c : rep.cells) {
        if (!c.error.empty()) log << "  cell c_reg=" << c.c_reg << " eps=" << c.eps << " failed: " << c.error << "\n";
    }
}

// --- convergence -----------------------------------------------------------

struct ConvergenceLevel {
    double eps = 0.0;
    double mean_l2 = 0.0;
    double mean_linf = 0.0;
    int runs = 0;
};

struct ConvergenceReport {
    std::vector<RunRecord> runs;  ///< noise-major, seeds inner
    std::vector<ConvergenceLevel> levels;
    double slope = std::nan("");
    std::vector<std::string> failures;
};

inline ConvergenceReport run_convergence(const ExperimentConfig& cfg, const VelocityProfile& truth,
                                         const NdMatrix& clean) {
    if (cfg.noise_levels.size() < 3) throw ConfigError("convergence needs at least 3 noise levels");
    if (cfg.seeds.size() < 2) throw ConfigError("convergence needs at least 2 seeds");
    const std::size_t n_seeds = cfg.seeds.size();
    const std::size_t total = cfg.noise_levels.size() * n_seeds;
    std::vector<std::optional<RunRecord>> slots(total);
    std::vector<std::string> fails(total);
    Schedule sched = cfg.schedule;
    sched.threads = 1;
    const std::string hash = cfg.hash();
    parallel_for(
        static_cast<int>(total),
        [&](int k) {
            const auto i = static_cast<std::size_t>(k);
            const double eps = cfg.noise_levels[i / n_seeds];
            const std::uint64_t seed = cfg.seeds[i % n_seeds];
            try {
                RunRecord r = scored_R1(clean, truth, eps, seed, sched, cfg.box.l1).record;
                r.config_hash = hash;
                if (!r.finite()) throw NumericError("non-finite metric");
                slots[i] = r;
            } catch (const std::exception& e) {
                fails[i] = "eps=" + num(eps) + " seed=" + std::to_string(seed) + ": " + e.what();
            }
        },
        cfg.schedule.threads);

    ConvergenceReport rep;
    for (std::size_t l = 0; l < cfg.noise_levels.size(); ++l) {
        ConvergenceLevel lev{cfg.noise_levels[l]};
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const auto& slot = slots[l * n_seeds + s];
            if (!slot) {
                rep.failures.push_back(fails[l * n_seeds + s]);
                continue;
            }
            rep.runs.push_back(*slot);
            lev.mean_l2 += slot->l2;
            lev.mean_linf += slot->linf;
            ++lev.runs;
        }
        if (lev.runs > 0) {
            lev.mean_l2 /= lev.runs;
            lev.mean_linf /= lev.runs;
            rep.levels.push_back(lev);
        }
    }
    if (rep.levels.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& l : rep.levels) {
            x.push_back(l.eps);
            y.push_back(l.mean_l2);
        }
        rep.slope = loglog_slope(x, y);
    }
    return rep;
}

inline void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
    CsvWriter csv(path, {"config_hash", "eps", "seed", "eps_measured", "l2", "linf", "alpha", "nu", "h",
                         "windows_eta_below_1", "windows_unconverged"});
    for (const auto& r : runs) {
        csv.row({r.config_hash, num(r.eps), std::to_string(r.seed), num(r.eps_measured), num(r.l2), num(r.linf),
                 num(r.alpha), num(r.nu), num(r.h), std::to_string(r.would_gate), std::to_string(r.unconverged)});
    }
}

/// Wall-clock times live apart from the metric tables so those stay byte-stable.
inline void write_timing_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
    CsvWriter csv(path, {"eps", "seed", "runtime_s"});
    for (const auto& r : runs) csv.row({num(r.eps), std::to_string(r.seed), num(r.runtime_s)});
}

inline void cmd_convergence(const ExperimentConfig& cfg, std::ostream& log) {
    const VelocityProfile truth = cfg.load_profile();
    const SimulatedMap sim = simulate_map(truth, cfg);
    ConvergenceReport rep = run_convergence(cfg, truth, sim.nd);
    const auto dir = prepare_dir(cfg.output_dir);
    for (auto& r : rep.runs) r.artifact = (dir / "convergence_runs.csv").string();
    write_runs_csv(dir / "convergence_runs.csv", rep.runs);
    write_timing_csv(dir / "timing.csv", rep.runs);
    {
        CsvWriter csv(dir / "convergence.csv", {"eps", "mean_l2", "mean_linf", "runs"});
        for (const auto& l : rep.levels) {
            csv.row({num(l.eps), num(l.mean_l2), num(l.mean_linf), std::to_string(l.runs)});
        }
    }
    {
        CsvWriter csv(dir / "convergence_fit.csv", {"slope", "levels"});
        csv.row({num(rep.slope), std::to_string(rep.levels.size())});
    }
    PlotSpec spec{"Convergence", "noise level", "mean L2 error", true, true, {}};
    PlotSeries data{"mean L2 error", {}, {}, true};
    PlotSeries fit{"slope " + detail::tick_label(rep.slope), {}, {}, false, true};
    for (const auto& l : rep.levels) {
        data.x.push_back(l.eps);
        data.y.push_back(l.mean_l2);
    }
    if (!rep.levels.empty() && std::isfinite(rep.slope)) {
        // Fitted line through the geometric centroid of the points.
        double lx = 0.0, ly = 0.0;
        for (const auto& l : rep.levels) {
            lx += std::log(l.eps);
            ly += std::log(l.mean_l2);
        }
        lx /= static_cast<double>(rep.levels.size());
        ly /= static_cast<double>(rep.levels.size());
        for (const auto& l : rep.levels) {
            fit.x.push_back(l.eps);
            fit.y.push_back(std::exp(ly + rep.slope * (std::log(l.eps) - lx)));
        }
    }
    spec.series.push_back(std::move(data));
    spec.series.push_back(std::move(fit));
    write_svg_plot(dir / "convergence.svg", spec);
    write_manifest(dir, cfg, "convergence");
    log << "convergence: " << rep.runs.size() << " runs, fitted slope " << rep.slope << "\n";
    for (const auto& l : rep.levels) log << "  eps=" << l.eps << " mean L2=" << l.mean_l2 << "\n";
    for (const auto& f : rep.failures) log << "  failed: " << f << "\n";
}

// --- discrepancy principle ---------------------------------------------------

struct MdpRow {
    double eps = 0.0;
    std::uint64_t seed = 0;
    double eps_measured = 0.0;
    bool feasible = false;
    double alpha_mdp = std::nan("");
    double alpha_schedule = 0.0;
    double err_mdp = std::nan("");
    double err_schedule = std::nan("");
    double discrepancy = std::nan("");
    double band_lo = 0.0;
    double band_hi = 0.0;
    std::string reason;
    std::vector<MdpStep> trail;
};

/// MDP against the schedule at every noise level, with the first seed.
inline std::vector<MdpRow> run_mdp(const ExperimentConfig& cfg, const VelocityProfile& truth, const NdMatrix& clean) {
    const std::uint64_t seed = cfg.seeds.front();
    std::vector<MdpRow> rows(cfg.noise_levels.size());
    Schedule sched = cfg.schedule;
    sched.threads = 1;
    const PulseForward forward = make_pulse_forward(cfg.grid(), cfg.simulation());
    const auto truth_fn = [&truth](double x) { return truth(x); };
    parallel_for(
        static_cast<int>(rows.size()),
        [&](int k) {
            MdpRow& row = rows[static_cast<std::size_t>(k)];
            row.eps = cfg.noise_levels[static_cast<std::size_t>(k)];
            row.seed = seed;
            const CalibratedNoise noisy = add_noise_op_level(clean, row.eps, seed);
            row.eps_measured = noisy.eps1d;
            row.alpha_schedule = sched.alpha(noisy.eps1d);
            try {
                const ReconResult ref = reconstruct_R1(noisy.noisy, noisy.eps1d, sched);
                row.err_schedule = speed_error(ref.speed, truth_fn, cfg.box.l1).l2;
            } catch (const std::exception& e) {
                row.reason = std::string("schedule reconstruction failed: ") + e.what();
            }
            const MdpResult res = mdp_search(noisy.noisy, noisy.noisy.generator, noisy.eps1d, forward, cfg.mdp, sched);
            row.band_lo = res.band_lo;
            row.band_hi = res.band_hi;
            row.trail = res.trail;
            row.feasible = res.feasible;
            if (res.feasible) {
                row.alpha_mdp = res.alpha;
                row.discrepancy = res.discrepancy;
                row.err_mdp = speed_error(res.result->speed, truth_fn, cfg.box.l1).l2;
            } else if (row.reason.empty()) {
                row.reason = res.reason;
            }
        },
        cfg.schedule.threads);
    return rows;
}

inline void cmd_mdp(const ExperimentConfig& cfg, std::ostream& log) {
    const VelocityProfile truth = cfg.load_profile();
    const SimulatedMap sim = simulate_map(truth, cfg);
    const std::vector<MdpRow> rows = run_mdp(cfg, truth, sim.nd);
    const auto dir = prepare_dir(cfg.output_dir);
    const std::string hash = cfg.hash();
    {
        CsvWriter csv(dir / "mdp.csv", {"config_hash", "eps", "seed", "eps_measured", "feasible", "alpha_mdp",
                                        "alpha_schedule", "l2_mdp", "l2_schedule", "discrepancy", "band_lo",
                                        "band_hi", "reason"});
        for (const auto& r : rows) {
            std::string reason = r.reason;
            for (char& ch : reason) {
                if (ch == ',') ch = ';';
            }
            csv.row({hash, num(r.eps), std::to_string(r.seed), num(r.eps_measured), r.feasible ? "1" : "0",
                     num(r.alpha_mdp), num(r.alpha_schedule), num(r.err_mdp), num(r.err_schedule),
                     num(r.discrepancy), num(r.band_lo), num(r.band_hi), "\"" + reason + "\""});
        }
    }
    {
        CsvWriter csv(dir / "mdp_trail.csv", {"eps", "step", "log10_alpha", "discrepancy"});
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.trail.size(); ++i) {
                csv.row({num(r.eps), std::to_string(i), num(r.trail[i].log_alpha), num(r.trail[i].discrepancy)});
            }
        }
    }
    PlotSpec spec{"Discrepancy principle against the schedule", "noise level", "alpha", true, true, {}};
    PlotSeries mdp{"alpha (discrepancy)", {}, {}, true};
    PlotSeries line{"c_reg eps^p", {}, {}, false, true};
    for (const auto& r : rows) {
        mdp.x.push_back(r.eps);
        mdp.y.push_back(r.alpha_mdp);
        line.x.push_back(r.eps);
        line.y.push_back(cfg.schedule.alpha(r.eps));
    }
    spec.series.push_back(std::move(mdp));
    spec.series.push_back(std::move(line));
    write_svg_plot(dir / "mdp.svg", spec);
    write_manifest(dir, cfg, "mdp");
    for (const auto& r : rows) {
        log << "mdp: eps=" << r.eps << (r.feasible ? " feasible" : " infeasible");
        if (r.feasible) log << " alpha=" << r.alpha_mdp << " (schedule " << r.alpha_schedule << ")";
        if (!r.reason.empty()) log << " [" << r.reason << "]";
        log << "\n";
    }
}

/// Writes the built-in profiles as two-column text files.
inline void cmd_export_profiles(const ExperimentConfig& cfg, std::ostream& log) {
    const auto dir = prepare_dir(cfg.output_dir);
    for (const char* id : {"unit", "smooth", "piecewise", "calibration"}) {
        std::ofstream out(dir / (std::string(id) + ".txt"));
        write_profile_file(builtin_profile(id, cfg.box), out);
        log << "export-profile: " << (dir / (std::string(id) + ".txt")).string() << "\n";
    }
}

}  // namespace bcinv
