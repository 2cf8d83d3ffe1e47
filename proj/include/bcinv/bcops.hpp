#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "bcinv/error.hpp"
#include "bcinv/linalg.hpp"
#include "bcinv/timegrid.hpp"

namespace bcinv {

namespace detail {

struct Point {
    double t;
    double s;
};

/// Clips a convex polygon against the half-plane a*t + b*s + c >= 0.
inline std::vector<Point> clip_half_plane(const std::vector<Point>& poly, double a, double b, double c) {
    std::vector<Point> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        const double fp = a * p.t + b * p.s + c;
        const double fq = a * q.t + b * q.s + c;
        if (fp >= 0.0) out.push_back(p);
        if ((fp >= 0.0) != (fq >= 0.0)) {
            const double lam = fp / (fp - fq);
            out.push_back({p.t + lam * (q.t - p.t), p.s + lam * (q.s - p.s)});
        }
    }
    return out;
}

inline double polygon_area(const std::vector<Point>& poly) {
    double twice = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        twice += p.t * q.s - q.t * p.s;
    }
    return 0.5 * std::abs(twice);
}

/// Area of [t0,t1] x [s0,s1] intersected with the triangle
/// {0 < t < s, t + s <= 2T}.
inline double triangle_overlap(double t0, double t1, double s0, double s1, double horizon) {
    std::vector<Point> poly{{t0, s0}, {t1, s0}, {t1, s1}, {t0, s1}};
    poly = clip_half_plane(poly, 1.0, 0.0, 0.0);            // t >= 0
    if (poly.size() >= 3) poly = clip_half_plane(poly, -1.0, 1.0, 0.0);          // s >= t
    if (poly.size() >= 3) poly = clip_half_plane(poly, -1.0, -1.0, 2.0 * horizon);  // t + s <= 2T
    return poly.size() >= 3 ? polygon_area(poly) : 0.0;
}

}  // namespace detail

/// (J_N)_{ij} = <J phi_j, phi_i>, where Jf(t) = 1/2 int 1_tri(t,s) f(s) ds.
/// Each entry is half the exact overlap area of cell_i x cell_j with the
/// triangle, times the basis normalisation 1/h.
inline Matrix build_J(const TimeGrid& grid) {
    const int n2 = grid.cells();
    const double h = grid.h();
    Matrix j = Matrix::Zero(n2, n2);
    for (int i = 0; i < grid.N(); ++i) {
        // Only cells with s >= t and t + s <= 2T can overlap.
        for (int k = i; k < n2 - i; ++k) {
            const double area = detail::triangle_overlap(i * h, (i + 1) * h, k * h, (k + 1) * h, grid.T());
            j(i, k) = 0.5 * area / h;
        }
    }
    return j;
}

/// Time reversal Rf(t) = f(2T - t): phi_j -> phi_{2N+1-j}.
inline Matrix build_R(const TimeGrid& grid) {
    const int n2 = grid.cells();
    Matrix r = Matrix::Zero(n2, n2);
    for (int k = 0; k < n2; ++k) r(n2 - 1 - k, k) = 1.0;
    return r;
}

/// Precomputed J_N and R on one grid.
class BcStack {
public:
    explicit BcStack(const TimeGrid& grid) : grid_(grid), j_(build_J(grid)), r_(build_R(grid)) {}

    const TimeGrid& grid() const { return grid_; }
    const Matrix& J() const { return j_; }
    const Matrix& R() const { return r_; }

    /// R M R: reverses both row and column order.
    static Matrix reverse_both(const Matrix& m) { return m.reverse(); }

private:
    TimeGrid grid_;
    Matrix j_;
    Matrix r_;
};

/// K^N L = R L R J_N - J_N L.
///
/// This is the negative of the product written with J_N first. With the
/// convention u_x(0,t) = f used by the forward solver, ND maps are negative
/// (Lambda H = -t for unit speed), and this ordering makes K^N Lambda positive
/// semidefinite on every window.
inline Matrix apply_K(const BcStack& stack, const Matrix& l) {
    const int n2 = stack.grid().cells();
    if (l.rows() != n2 || l.cols() != n2) throw ConfigError("apply_K: operator does not match the grid");
    return BcStack::reverse_both(l) * stack.J() - stack.J() * l;
}

/// H^N L(r) = P_r (K^N L) P_r as a full 2N x 2N matrix.
inline Matrix apply_H(const BcStack& stack, const Matrix& l, double r) {
    const Window w = window_for(stack.grid(), r);
    const Matrix k = apply_K(stack, l);
    Matrix out = Matrix::Zero(k.rows(), k.cols());
    out.block(w.first, w.first, w.count, w.count) = k.block(w.first, w.first, w.count, w.count);
    return out;
}

}  // namespace bcinv
