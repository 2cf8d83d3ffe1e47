#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bcinv/error.hpp"

namespace bcinv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Lower-triangular matrix constant along diagonals: mat(j,k) = generator(j-k) for j >= k.
inline Matrix causal_toeplitz(const Vector& generator) {
    const Eigen::Index n = generator.size();
    Matrix mat = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        mat.col(k).tail(n - k) = generator.head(n - k);
    }
    return mat;
}

/// Product of a causal Toeplitz matrix with a vector without forming the matrix.
inline Vector causal_toeplitz_apply(const Vector& generator, const Vector& x) {
    const Eigen::Index n = generator.size();
    Vector y = Vector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (x[k] != 0.0) y.tail(n - k) += x[k] * generator.head(n - k);
    }
    return y;
}

namespace detail {

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) strictly below x.
inline int sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x) {
    int count = 0;
    double d = 1.0;
    const double tiny = std::numeric_limits<double>::min();
    for (std::size_t i = 0; i < diag.size(); ++i) {
        const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
        d = diag[i] - x - (i == 0 ? 0.0 : b2 / d);
        if (d == 0.0) d = -tiny;
        if (d < 0.0) ++count;
    }
    return count;
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
inline double tridiag_min_eigenvalue(const std::vector<double>& diag, const std::vector<double>& off) {
    double lo = std::numeric_limits<double>::max();
    double hi = std::numeric_limits<double>::lowest();
    for (std::size_t i = 0; i < diag.size(); ++i) {
        double radius = 0.0;
        if (i > 0) radius += std::abs(off[i - 1]);
        if (i + 1 < diag.size()) radius += std::abs(off[i]);
        lo = std::min(lo, diag[i] - radius);
        hi = std::max(hi, diag[i] + radius);
    }
    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    for (int it = 0; it < 200 && hi - lo > 4e-16 * scale; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(diag, off, mid) >= 1) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Solves (T - shift I) y = rhs for symmetric tridiagonal T, Gaussian
/// elimination with partial pivoting (same scheme as LAPACK dgtsv).
inline std::vector<double> tridiag_shifted_solve(const std::vector<double>& diag,
                                                 const std::vector<double>& off, double shift,
                                                 std::vector<double> b) {
    const std::size_t n = diag.size();
    std::vector<double> d(n), dl(off), du(off), du2(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = diag[i] - shift;
    const double tiny = 1e-300;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (std::abs(d[i]) < tiny) d[i] = tiny;
            const double m = dl[i] / d[i];
            d[i + 1] -= m * du[i];
            b[i + 1] -= m * b[i];
        } else {
            const double m = d[i] / dl[i];
            d[i] = dl[i];
            const double old_next = d[i + 1];
            d[i + 1] = du[i] - m * old_next;
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -m * du2[i];
            }
            du[i] = old_next;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= m * b[i];
        }
    }
    if (std::abs(d[n - 1]) < tiny) d[n - 1] = tiny;
    std::vector<double> y(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = b[ii];
        if (ii + 1 < n) acc -= du[ii] * y[ii + 1];
        if (ii + 2 < n) acc -= du2[ii] * y[ii + 2];
        y[ii] = acc / d[ii];
    }
    return y;
}

}  // namespace detail

struct LanczosOptions {
    double rel_tol = 1e-10;  ///< eigen-residual tolerance relative to ||S||
    int check_every = 4;
};

/// Smallest eigenvalue of a symmetric matrix by Lanczos with full
/// reorthogonalization.
///
/// Ritz values are taken from the tridiagonal projection by Sturm bisection;
/// convergence is judged on the true residual ||S u - theta u|| of the Ritz
/// vector. On breakdown the basis is extended with a fresh orthogonal
/// direction, so the iteration is exact after n steps.
inline double min_eigenvalue_symmetric(const Matrix& s, LanczosOptions opts = {}) {
    const Eigen::Index n = s.rows();
    if (n == 0) return 0.0;
    if (n == 1) return s(0, 0);
    const double scale = s.cwiseAbs().rowwise().sum().maxCoeff();
    if (!std::isfinite(scale)) throw NumericError("min_eigenvalue_symmetric: non-finite entries");
    if (scale == 0.0) return 0.0;

    std::mt19937_64 gen(0x1a2c05ULL);
    std::normal_distribution<double> normal;
    auto random_orthogonal = [&](const Matrix& basis, Eigen::Index used) -> Vector {
        for (int attempt = 0; attempt < 8; ++attempt) {
            Vector q(n);
            for (Eigen::Index i = 0; i < n; ++i) q[i] = normal(gen);
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index j = 0; j < used; ++j) q -= basis.col(j).dot(q) * basis.col(j);
            }
            const double qn = q.norm();
            if (qn > 1e-8) return q / qn;
        }
        throw NumericError("min_eigenvalue_symmetric: could not extend Krylov basis");
    };

    Matrix q_basis(n, n);
    std::vector<double> alpha;
    std::vector<double> beta;
    q_basis.col(0) = random_orthogonal(q_basis, 0);
    double theta = 0.0;

    for (Eigen::Index k = 0; k < n; ++k) {
        Vector w = s * q_basis.col(k);
        alpha.push_back(q_basis.col(k).dot(w));
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j <= k; ++j) w -= q_basis.col(j).dot(w) * q_basis.col(j);
        }
        const double b = w.norm();
        const bool last = (k + 1 == n);
        const bool check = last || ((k + 1) % opts.check_every == 0);
        if (check) {
            theta = detail::tridiag_min_eigenvalue(alpha, beta);
            if (last) return theta;
            // Ritz vector via inverse iteration on the tridiagonal.
            const std::size_t m = alpha.size();
            std::vector<double> y(m, 1.0);
            const double shift = theta - 1e-13 * scale;
            for (int rep = 0; rep < 2; ++rep) {
                y = detail::tridiag_shifted_solve(alpha, beta, shift, y);
                double nrm = 0.0;
                for (double v : y) nrm += v * v;
                nrm = std::sqrt(nrm);
                for (double& v : y) v /= nrm;
            }
            Vector u = Vector::Zero(n);
            for (std::size_t j = 0; j < m; ++j) u += y[j] * q_basis.col(static_cast<Eigen::Index>(j));
            const double res = (s * u - theta * u).norm();
            if (res <= opts.rel_tol * scale) return theta;
        }
        if (b <= 1e-12 * scale) {
            beta.push_back(0.0);
            q_basis.col(k + 1) = random_orthogonal(q_basis, k + 1);
        } else {
            beta.push_back(b);
            q_basis.col(k + 1) = w / b;
        }
    }
    return theta;
}

/// Largest eigenvalue of a symmetric matrix (Lanczos on -S).
inline double max_eigenvalue_symmetric(const Matrix& s, LanczosOptions opts = {}) {
    return -min_eigenvalue_symmetric(-s, opts);
}

/// Largest singular value of `a`: square root of the top eigenvalue of the
/// normal matrix a^T a, found by Lanczos (a Krylov-accelerated power iteration).
inline double spectral_norm(const Matrix& a, LanczosOptions opts = {}) {
    if (a.size() == 0) return 0.0;
    const double fro = a.norm();
    if (!std::isfinite(fro)) throw NumericError("spectral_norm: non-finite matrix entries");
    if (fro == 0.0) return 0.0;
    const Matrix normal = a.rows() >= a.cols() ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
    return std::sqrt(std::max(max_eigenvalue_symmetric(normal, opts), 0.0));
}

struct GmresOptions {
    int max_outer = 6;    ///< restart cycles
    int restart = 10;     ///< Arnoldi steps per cycle
    double tol = 1e-12;   ///< relative residual target ||b - Ax|| / ||b||
};

struct GmresResult {
    Vector x;
    double rel_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.
///
/// `apply` maps a vector to A*vector. The initial guess is zero. The residual
/// is nonincreasing, so the returned iterate is the best one seen.
template <typename ApplyOp>
GmresResult gmres(ApplyOp&& apply, const Vector& rhs, const GmresOptions& opts = {}) {
    const Eigen::Index n = rhs.size();
    GmresResult out;
    out.x = Vector::Zero(n);
    const double bnorm = rhs.norm();
    if (!std::isfinite(bnorm)) throw NumericError("gmres: non-finite right-hand side");
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    const int m = std::max(1, std::min<int>(opts.restart, static_cast<int>(n)));
    Vector r = rhs;
    double rnorm = bnorm;

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        Matrix v(n, m + 1);
        Matrix h = Matrix::Zero(m + 1, m);
        Vector cs = Vector::Zero(m), sn = Vector::Zero(m), g = Vector::Zero(m + 1);
        v.col(0) = r / rnorm;
        g[0] = rnorm;
        int used = 0;
        for (int j = 0; j < m; ++j) {
            Vector w = apply(Vector(v.col(j)));
            for (int i = 0; i <= j; ++i) {
                h(i, j) = v.col(i).dot(w);
                w -= h(i, j) * v.col(i);
            }
            h(j + 1, j) = w.norm();
            if (h(j + 1, j) > 0.0) v.col(j + 1) = w / h(j + 1, j);
            for (int i = 0; i < j; ++i) {
                const double tmp = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
                h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
                h(i, j) = tmp;
            }
            const double denom = std::hypot(h(j, j), h(j + 1, j));
            if (denom == 0.0) {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h(j, j) / denom;
                sn[j] = h(j + 1, j) / denom;
            }
            h(j, j) = cs[j] * h(j, j) + sn[j] * h(j + 1, j);
            h(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            ++used;
            ++out.iterations;
            if (std::abs(g[j + 1]) <= opts.tol * bnorm) break;
        }
        // Back substitution on the used leading block.
        Vector y = Vector::Zero(used);
        for (int i = used - 1; i >= 0; --i) {
            double acc = g[i];
            for (int k = i + 1; k < used; ++k) acc -= h(i, k) * y[k];
            y[i] = h(i, i) != 0.0 ? acc / h(i, i) : 0.0;
        }
        out.x += v.leftCols(used) * y;
        r = rhs - apply(out.x);
        rnorm = r.norm();
        if (!std::isfinite(rnorm)) throw NumericError("gmres: residual became non-finite");
        if (rnorm <= opts.tol * bnorm) {
            out.converged = true;
            break;
        }
    }
    out.rel_residual = rnorm / bnorm;
    return out;
}

}  // namespace bcinv
