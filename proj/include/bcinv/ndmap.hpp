#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bcinv/error.hpp"
#include "bcinv/forward.hpp"
#include "bcinv/linalg.hpp"
#include "bcinv/rng.hpp"
#include "bcinv/timegrid.hpp"

namespace bcinv {

/// Discrete ND map: a linear operator on P^N in phi coordinates. When tagged
/// causal Toeplitz, `generator` holds the first column (Lambda_1..Lambda_2N).
struct NdMatrix {
    TimeGrid grid;
    Matrix mat;
    bool causal_toeplitz = false;
    Vector generator;

    static NdMatrix from_generator(const TimeGrid& grid, Vector gen) {
        if (gen.size() != grid.cells()) throw ConfigError("NdMatrix: generator length must be 2N");
        Matrix mat = bcinv::causal_toeplitz(gen);
        return {grid, std::move(mat), true, std::move(gen)};
    }

    static NdMatrix from_matrix(const TimeGrid& grid, Matrix m) {
        if (m.rows() != grid.cells() || m.cols() != grid.cells()) throw ConfigError("NdMatrix: matrix must be 2N x 2N");
        return {grid, std::move(m), false, Vector()};
    }
};

/// A single noisy boundary measurement: P^N coordinates of the trace of the
/// step response plus additive noise of l2 size eps0.
struct SingleTrace {
    TimeGrid grid;
    Vector coeffs;
    double eps0 = 0.0;
};

/// Builds the Toeplitz ND map from the trace of the response to phi_{1,N}:
/// Lambda_j = <trace, phi_{j,N}>.
inline NdMatrix build_from_pulse(const TraceRecord& trace, const TimeGrid& grid) {
    return NdMatrix::from_generator(grid, project_trace(trace, grid).coeffs);
}

/// Unit-norm Gaussian direction of length n (deterministic in the seed).
inline Vector unit_noise(Eigen::Index n, std::uint64_t seed) {
    GaussianSampler sampler(seed);
    Vector z = sampler.vector(n);
    const double nz = z.norm();
    if (!(nz > 0.0)) throw NumericError("unit_noise: degenerate Gaussian draw");
    return z / nz;
}

/// Adds Gaussian noise of exact l2 size eps0d to the Toeplitz generator.
inline NdMatrix add_noise(const NdMatrix& nd, double eps0d, std::uint64_t seed) {
    if (!(eps0d >= 0.0)) throw ConfigError("add_noise: eps0d must be nonnegative");
    if (!nd.causal_toeplitz) throw ConfigError("add_noise: noise model requires a Toeplitz ND map");
    if (eps0d == 0.0) return nd;
    return NdMatrix::from_generator(nd.grid, nd.generator + eps0d * unit_noise(nd.grid.cells(), seed));
}

/// Largest singular value of a.mat - b.mat.
inline double op_norm_diff(const NdMatrix& a, const NdMatrix& b) {
    if (!(a.grid == b.grid)) throw ConfigError("op_norm_diff: grid mismatch");
    return spectral_norm(a.mat - b.mat);
}

/// Noisy ND map whose deviation from `nd` has operator norm eps1 (up to the
/// accuracy of the norm estimate). The noise direction is the same Gaussian
/// draw as add_noise uses for this seed, rescaled.
struct CalibratedNoise {
    NdMatrix noisy;
    double eps0d = 0.0;  ///< l2 size of the generator perturbation
    double eps1d = 0.0;  ///< measured operator-norm deviation
};

inline CalibratedNoise add_noise_op_level(const NdMatrix& nd, double eps1, std::uint64_t seed) {
    if (!(eps1 >= 0.0)) throw ConfigError("add_noise_op_level: eps1 must be nonnegative");
    if (!nd.causal_toeplitz) throw ConfigError("add_noise_op_level: noise model requires a Toeplitz ND map");
    if (eps1 == 0.0) return {nd, 0.0, 0.0};
    const Vector dir = unit_noise(nd.grid.cells(), seed);
    const double unit_op = spectral_norm(causal_toeplitz(dir));
    const double eps0d = eps1 / unit_op;
    CalibratedNoise out{add_noise(nd, eps0d, seed), eps0d, 0.0};
    out.eps1d = op_norm_diff(out.noisy, nd);
    return out;
}

/// Resolution of the single-measurement lift: N0 = 2^l0 with
/// l0 = floor((4/7) log2(1/eps0)), clamped at 0.
struct LiftResolution {
    int l0 = 0;
    int n0 = 1;
    bool low_resolution = false;  ///< N0 < 4: fewer than eight cells
};

inline LiftResolution lift_resolution(double eps0) {
    if (!(eps0 > 0.0)) throw ConfigError("lift_resolution: eps0 must be positive");
    const double raw = (4.0 / 7.0) * std::log2(1.0 / eps0);
    // The small offset keeps exact powers such as eps0 = 2^-7 from rounding down.
    const int l0 = std::max(0, static_cast<int>(std::floor(raw + 1e-12)));
    if (l0 > 24) throw ConfigError("lift_resolution: eps0 too small for a dense lift");
    LiftResolution r{l0, 1 << l0, false};
    r.low_resolution = r.n0 < 4;
    return r;
}

/// L2 projection of P^N coordinates onto the nested coarser P^{coarse}.
inline Vector restrict_coeffs(const Vector& fine_coeffs, int fine_n, int coarse_n) {
    if (fine_n % coarse_n != 0) throw ConfigError("restrict_coeffs: grids are not nested");
    const int ratio = fine_n / coarse_n;
    Vector out(2 * coarse_n);
    const double w = 1.0 / std::sqrt(static_cast<double>(ratio));
    for (int k = 0; k < 2 * coarse_n; ++k) out[k] = w * fine_coeffs.segment(k * ratio, ratio).sum();
    return out;
}

/// Lifts a single step-response measurement to a Toeplitz ND map on P^{N0}.
///
/// The trace is projected to P^{N0}; since phi_{1,N0} = h0^{-1/2}(H - H(. - h0)),
/// the response to phi_{j,N0} is h0^{-1/2} times the difference of the trace
/// translated by (j-1)h0 and by j h0. On the coarse basis a translation by h0
/// is a shift by one cell, so the generator is g_k = h0^{-1/2}(mu_k - mu_{k-1}).
inline NdMatrix lift_single(const SingleTrace& m) {
    const int n = m.grid.N();
    if (!is_power_of_two(n)) throw ConfigError("lift_single: N must be a power of two");
    if (m.coeffs.size() != m.grid.cells()) throw ConfigError("lift_single: coefficient count must be 2N");
    const LiftResolution res = lift_resolution(m.eps0);
    if (n < res.n0) {
        throw ConfigError("lift_single: measurement grid N = " + std::to_string(n) + " is coarser than N0 = " +
                          std::to_string(res.n0));
    }
    const TimeGrid coarse(m.grid.T(), res.n0);
    const Vector mu = restrict_coeffs(m.coeffs, n, res.n0);
    Vector gen(coarse.cells());
    const double scale = 1.0 / std::sqrt(coarse.h());
    for (int k = 0; k < coarse.cells(); ++k) gen[k] = scale * (mu[k] - (k > 0 ? mu[k - 1] : 0.0));
    return NdMatrix::from_generator(coarse, std::move(gen));
}

/// Single measurement from a simulated step-response trace plus Gaussian noise
/// of exact l2 size eps0 (eps0 = 0 gives the clean projection).
inline SingleTrace make_single_trace(const TraceRecord& step_trace, const TimeGrid& grid, double eps0,
                                     std::uint64_t seed) {
    if (!(eps0 >= 0.0)) throw ConfigError("make_single_trace: eps0 must be nonnegative");
    Vector c = project_trace(step_trace, grid).coeffs;
    if (eps0 > 0.0) c += eps0 * unit_noise(grid.cells(), seed);
    return {grid, std::move(c), eps0};
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Parses "key=value" tokens of a '#' header line.
inline double header_value(const std::string& header, const std::string& key) {
    std::istringstream is(header);
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos && tok.substr(0, eq) == key) {
            try {
                return std::stod(tok.substr(eq + 1));
            } catch (const std::exception&) {
                throw ConfigError("malformed header value for " + key);
            }
        }
    }
    throw ConfigError("header lacks key " + key);
}

inline std::vector<std::vector<double>> read_csv_rows(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && (std::isalpha(static_cast<unsigned char>(line[0])) != 0)) continue;  // column header
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("malformed CSV cell: " + cell);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

/// Header line, then "j,lambda" rows (Toeplitz) or full matrix rows.
inline void write_ndmap(const NdMatrix& nd, std::ostream& out) {
    out << "# bcinv-ndmap T=" << detail::fmt17(nd.grid.T()) << " N=" << nd.grid.N()
        << " causal_toeplitz=" << (nd.causal_toeplitz ? 1 : 0) << "\n";
    if (nd.causal_toeplitz) {
        out << "j,lambda\n";
        for (Eigen::Index j = 0; j < nd.generator.size(); ++j) {
            out << (j + 1) << "," << detail::fmt17(nd.generator[j]) << "\n";
        }
        return;
    }
    for (Eigen::Index i = 0; i < nd.mat.rows(); ++i) {
        for (Eigen::Index k = 0; k < nd.mat.cols(); ++k) {
            out << (k ? "," : "") << detail::fmt17(nd.mat(i, k));
        }
        out << "\n";
    }
}

inline NdMatrix read_ndmap(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# bcinv-ndmap", 0) != 0) {
        throw ConfigError("read_ndmap: missing bcinv-ndmap header");
    }
    const TimeGrid grid(detail::header_value(header, "T"), static_cast<int>(detail::header_value(header, "N")));
    const bool toeplitz = detail::header_value(header, "causal_toeplitz") != 0.0;
    const auto rows = detail::read_csv_rows(in);
    if (toeplitz) {
        if (static_cast<int>(rows.size()) != grid.cells()) throw ConfigError("read_ndmap: expected 2N generator rows");
        Vector gen(grid.cells());
        for (int j = 0; j < grid.cells(); ++j) {
            if (rows[static_cast<std::size_t>(j)].size() != 2) throw ConfigError("read_ndmap: expected j,lambda rows");
            gen[j] = rows[static_cast<std::size_t>(j)][1];
        }
        return NdMatrix::from_generator(grid, std::move(gen));
    }
    if (static_cast<int>(rows.size()) != grid.cells()) throw ConfigError("read_ndmap: expected 2N matrix rows");
    Matrix m(grid.cells(), grid.cells());
    for (int i = 0; i < grid.cells(); ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (static_cast<int>(row.size()) != grid.cells()) throw ConfigError("read_ndmap: ragged matrix row");
        for (int k = 0; k < grid.cells(); ++k) m(i, k) = row[static_cast<std::size_t>(k)];
    }
    return NdMatrix::from_matrix(grid, std::move(m));
}

inline void write_single_trace(const SingleTrace& m, std::ostream& out) {
    out << "# bcinv-single-trace T=" << detail::fmt17(m.grid.T()) << " N=" << m.grid.N()
        << " eps0=" << detail::fmt17(m.eps0) << "\n";
    out << "j,coeff\n";
    for (Eigen::Index j = 0; j < m.coeffs.size(); ++j) out << (j + 1) << "," << detail::fmt17(m.coeffs[j]) << "\n";
}

inline SingleTrace read_single_trace(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# bcinv-single-trace", 0) != 0) {
        throw ConfigError("read_single_trace: missing bcinv-single-trace header");
    }
    const TimeGrid grid(detail::header_value(header, "T"), static_cast<int>(detail::header_value(header, "N")));
    const double eps0 = detail::header_value(header, "eps0");
    const auto rows = detail::read_csv_rows(in);
    if (static_cast<int>(rows.size()) != grid.cells()) throw ConfigError("read_single_trace: expected 2N rows");
    Vector c(grid.cells());
    for (int j = 0; j < grid.cells(); ++j) {
        if (rows[static_cast<std::size_t>(j)].size() != 2) throw ConfigError("read_single_trace: expected j,coeff rows");
        c[j] = rows[static_cast<std::size_t>(j)][1];
    }
    return {grid, std::move(c), eps0};
}

inline void write_trace_csv(const TraceRecord& trace, std::ostream& out) {
    out << "# bcinv-trace T=" << detail::fmt17(trace.T) << " n_sim=" << trace.n_sim << " source=" << trace.source
        << "\n";
    out << "t,u\n";
    for (int j = 0; j <= trace.n_sim; ++j) {
        out << detail::fmt17(trace.time(j)) << "," << detail::fmt17(trace.samples[static_cast<std::size_t>(j)])
            << "\n";
    }
}

inline TraceRecord read_trace_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# bcinv-trace", 0) != 0) {
        throw ConfigError("read_trace_csv: missing bcinv-trace header");
    }
    TraceRecord tr;
    tr.T = detail::header_value(header, "T");
    tr.n_sim = static_cast<int>(detail::header_value(header, "n_sim"));
    const auto pos = header.find("source=");
    if (pos != std::string::npos) tr.source = header.substr(pos + 7);
    for (const auto& row : detail::read_csv_rows(in)) {
        if (row.size() != 2) throw ConfigError("read_trace_csv: expected t,u rows");
        tr.samples.push_back(row[1]);
    }
    if (tr.samples.size() != static_cast<std::size_t>(tr.n_sim) + 1) {
        throw ConfigError("read_trace_csv: sample count must be n_sim + 1");
    }
    return tr;
}

/// Loads a two-column (x c) profile on a uniform grid; '#' lines are comments.
inline VelocityProfile read_profile_file(const std::string& path, PriorBox box = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profile file: " + path);
    std::vector<double> xs;
    std::vector<double> cs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (char& ch : line) {
            if (ch == ',') ch = ' ';
        }
        std::istringstream ls(line);
        double x = 0.0;
        double c = 0.0;
        if (!(ls >> x >> c)) {
            if (std::isalpha(static_cast<unsigned char>(line[0])) != 0 && xs.empty()) continue;  // column names
            throw ConfigError("malformed profile line: " + line);
        }
        xs.push_back(x);
        cs.push_back(c);
    }
    if (xs.size() < 2) throw ConfigError("profile file needs at least two samples: " + path);
    const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::abs(xs[i] - (xs.front() + dx * static_cast<double>(i))) > 1e-6 * std::max(1.0, std::abs(dx))) {
            throw ConfigError("profile file grid is not uniform: " + path);
        }
    }
    return {xs.front(), dx, std::move(cs), box};
}

inline void write_profile_file(const VelocityProfile& p, std::ostream& out) {
    out << "# x c\n";
    for (std::size_t i = 0; i < p.size(); ++i) out << detail::fmt17(p.x(i)) << " " << detail::fmt17(p.cvals()[i]) << "\n";
}

}  // namespace bcinv
