#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>

#include "bcinv/error.hpp"
#include "bcinv/linalg.hpp"

namespace bcinv {

/// Uniform partition of [0, 2T) into 2N cells of width T/N, carrying the
/// orthonormal piecewise-constant basis phi_{n,N} = (N/T)^{1/2} 1_{cell n}.
class TimeGrid {
public:
    TimeGrid(double horizon, int n) : horizon_(horizon), n_(n) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("TimeGrid: T must be positive");
        if (n < 1) throw DomainError("TimeGrid: N must be >= 1");
    }

    double T() const { return horizon_; }
    int N() const { return n_; }
    int cells() const { return 2 * n_; }
    double h() const { return horizon_ / n_; }
    /// Value of every basis function on its support.
    double basis_height() const { return std::sqrt(n_ / horizon_); }
    /// Left edge of 1-based cell n, i.e. (n-1)T/N.
    double cell_start(int n) const { return (n - 1) * h(); }

    /// 0-based index of the cell containing t in [0, 2T).
    int cell_of(double t) const {
        if (!(t >= 0.0) || !(t < 2.0 * horizon_)) throw DomainError("TimeGrid: time outside [0,2T)");
        const int idx = static_cast<int>(std::floor(t / h()));
        return std::min(idx, cells() - 1);
    }

    bool operator==(const TimeGrid& other) const {
        return n_ == other.n_ && std::abs(horizon_ - other.horizon_) <= 1e-12 * horizon_;
    }

private:
    double horizon_;
    int n_;
};

inline bool is_power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }

/// Element of P^N: coordinates on the phi basis.
struct PiecewiseFn {
    TimeGrid grid;
    Vector coeffs;

    PiecewiseFn(TimeGrid g, Vector c) : grid(g), coeffs(std::move(c)) {
        if (coeffs.size() != grid.cells()) throw ConfigError("PiecewiseFn: coefficient count must be 2N");
    }

    double operator()(double t) const { return coeffs[grid.cell_of(t)] * grid.basis_height(); }
    /// L2(0,2T) norm; equals the euclidean norm of the coefficients.
    double norm() const { return coeffs.norm(); }
};

/// phi_{n,N}(t) for 1-based n.
inline double basis_eval(int n, const TimeGrid& grid, double t) {
    if (n < 1 || n > grid.cells()) throw DomainError("basis_eval: index outside 1..2N");
    const int cell = grid.cell_of(t);
    return cell == n - 1 ? grid.basis_height() : 0.0;
}

/// Orthogonal projection of a function given by its antiderivative F (F' = f):
/// each coefficient is (F(b) - F(a)) / sqrt(h), exact cell integration.
inline PiecewiseFn project_antiderivative(const std::function<double(double)>& antiderivative,
                                          const TimeGrid& grid) {
    Vector c(grid.cells());
    const double scale = 1.0 / std::sqrt(grid.h());
    double left = antiderivative(0.0);
    for (int k = 0; k < grid.cells(); ++k) {
        const double right = antiderivative((k + 1) * grid.h());
        c[k] = (right - left) * scale;
        left = right;
    }
    if (!c.allFinite()) throw NumericError("project: non-finite coefficients");
    return {grid, c};
}

/// Orthogonal projection with composite midpoint quadrature, 8 nodes per cell.
/// Exact on P^N.
inline PiecewiseFn project(const std::function<double(double)>& f, const TimeGrid& grid,
                           int nodes_per_cell = 8) {
    Vector c(grid.cells());
    const double h = grid.h();
    const double dt = h / nodes_per_cell;
    const double scale = grid.basis_height() * dt;
    for (int k = 0; k < grid.cells(); ++k) {
        double acc = 0.0;
        for (int q = 0; q < nodes_per_cell; ++q) {
            const double v = f(k * h + (q + 0.5) * dt);
            if (!std::isfinite(v)) throw NumericError("project: non-finite sample");
            acc += v;
        }
        c[k] = acc * scale;
    }
    return {grid, c};
}

/// Index window of P_r: the cells inside (T - r, T) for grid-aligned r = jT/N.
struct Window {
    int first = 0;  ///< 0-based index of the first active cell
    int count = 0;  ///< number of active cells (= j)
};

/// Resolves r to its window; r must lie in [0, T] and be a multiple of T/N.
inline Window window_for(const TimeGrid& grid, double r) {
    if (!(r >= -1e-12 * grid.T()) || !(r <= grid.T() * (1.0 + 1e-12))) {
        throw DomainError("pr_mask: r outside [0,T]");
    }
    const double j_real = r / grid.h();
    const double j_round = std::round(j_real);
    if (std::abs(j_real - j_round) > 1e-9) throw ConfigError("pr_mask: r is not grid-aligned");
    const int j = static_cast<int>(j_round);
    return {grid.N() - j, j};
}

/// Diagonal 0/1 matrix of the window projection P_r f = 1_{(T-r,T)} f.
inline Matrix pr_mask(const TimeGrid& grid, double r) {
    const Window w = window_for(grid, r);
    Vector d = Vector::Zero(grid.cells());
    d.segment(w.first, w.count).setOnes();
    return d.asDiagonal();
}

/// Coefficients of b(t) = 1_{(0,T)}(t) (T - t), integrated exactly per cell.
inline Vector b_coeffs(const TimeGrid& grid) {
    const double h = grid.h();
    Vector c = Vector::Zero(grid.cells());
    for (int k = 0; k < grid.N(); ++k) c[k] = std::sqrt(h) * (grid.T() - (k + 0.5) * h);
    return c;
}

/// Inclusion of P^{coarse} into P^{fine} (fine.N a power-of-two multiple of
/// coarse.N) as a (2 fine.N) x (2 coarse.N) matrix with orthonormal columns.
inline Matrix refinement_matrix(const TimeGrid& coarse, const TimeGrid& fine) {
    if (fine.N() % coarse.N() != 0 || std::abs(fine.T() - coarse.T()) > 1e-12 * fine.T()) {
        throw ConfigError("refinement_matrix: grids are not nested");
    }
    const int ratio = fine.N() / coarse.N();
    const double w = 1.0 / std::sqrt(static_cast<double>(ratio));
    Matrix q = Matrix::Zero(fine.cells(), coarse.cells());
    for (int k = 0; k < coarse.cells(); ++k) q.block(k * ratio, k, ratio, 1).setConstant(w);
    return q;
}

}  // namespace bcinv
