#include <gtest/gtest.h>

#include <cmath>

#include "bcinv/bcops.hpp"
#include "bcinv/timegrid.hpp"
#include "oracles.hpp"

using namespace bcinv;

TEST(BuildJ, AppliedToOneGivesBoundaryFunction) {
    for (int n : {1, 2, 8, 64}) {
        const TimeGrid g(0.6, n);
        const Vector one = Vector::Constant(g.cells(), std::sqrt(g.h()));
        EXPECT_LT((build_J(g) * one - b_coeffs(g)).cwiseAbs().maxCoeff(), 1e-12) << "N = " << n;
    }
}

TEST(BuildJ, EntriesMatchQuadrature) {
    for (int n : {1, 2, 4, 8}) {
        const TimeGrid g(0.6, n);
        const Matrix j = build_J(g);
        for (int i = 0; i < g.cells(); ++i) {
            for (int k = 0; k < g.cells(); ++k) {
                EXPECT_NEAR(j(i, k), oracle::j_entry_quadrature(g, i, k, 64), 1e-6) << i << "," << k;
            }
        }
    }
}

TEST(BuildJ, RowsBeyondHorizonVanish) {
    const TimeGrid g(0.6, 8);
    const Matrix j = build_J(g);
    EXPECT_EQ(j.bottomRows(g.N()).cwiseAbs().maxCoeff(), 0.0);
    // Strictly lower part is empty as well (s > t on the triangle).
    for (int i = 0; i < g.cells(); ++i) {
        for (int k = 0; k < i; ++k) EXPECT_EQ(j(i, k), 0.0);
    }
}

TEST(BuildR, ReversesCells) {
    const TimeGrid g(0.6, 4);
    const Matrix r = build_R(g);
    const Vector e1 = Vector::Unit(8, 0);
    EXPECT_EQ((r * e1 - Vector::Unit(8, 7)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((r * r - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 0.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Vector f = oracle::random_vector(8, seed);
        EXPECT_NEAR((r * f).norm(), f.norm(), 1e-14);
    }
}

TEST(ApplyK, ZeroOperator) {
    const BcStack s(TimeGrid(0.6, 4));
    EXPECT_EQ(apply_K(s, Matrix::Zero(8, 8)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ApplyK, MatchesDenseTripleProducts) {
    const TimeGrid g(0.6, 8);
    const BcStack s(g);
    const Matrix j = build_J(g);
    const Matrix r = build_R(g);
    const Matrix id = Matrix::Identity(16, 16);
    EXPECT_LT((apply_K(s, id) - (r * id * r * j - j * id)).cwiseAbs().maxCoeff(), 1e-15);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Matrix l = oracle::random_matrix(16, 16, seed);
        EXPECT_LT((apply_K(s, l) - (r * l * r * j - j * l)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(ApplyK, UnitSpeedWindowsNearlyPsd) {
    const TimeGrid g(0.6, 64);
    const BcStack s(g);
    const Matrix k = apply_K(s, oracle::unit_speed_map(g));
    for (int j : {1, 8, 32, 64}) {
        const Matrix pr = pr_mask(g, j * g.h());
        const Matrix h = pr * k * pr;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const Vector f = oracle::random_vector(g.cells(), seed);
            EXPECT_GE(f.dot(h * f), -1e-6 * f.squaredNorm());
        }
    }
}

TEST(ApplyK, GridMismatchIsConfigError) {
    const BcStack s(TimeGrid(0.6, 4));
    EXPECT_THROW(apply_K(s, Matrix::Zero(4, 4)), ConfigError);
}

TEST(ApplyH, ZeroAndFullWindow) {
    const TimeGrid g(0.6, 4);
    const BcStack s(g);
    const Matrix l = oracle::random_matrix(8, 8, 11);
    EXPECT_EQ(apply_H(s, l, 0.0).cwiseAbs().maxCoeff(), 0.0);
    const Matrix pt = pr_mask(g, g.T());
    EXPECT_LT((apply_H(s, l, g.T()) - pt * apply_K(s, l) * pt).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ApplyH, Nesting) {
    const TimeGrid g(0.6, 8);
    const BcStack s(g);
    const Matrix l = oracle::random_matrix(16, 16, 12);
    const Matrix full = apply_H(s, l, g.T());
    for (int j = 0; j <= 8; ++j) {
        const double r = j * g.h();
        const Matrix pr = pr_mask(g, r);
        EXPECT_LT((apply_H(s, l, r) - pr * full * pr).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_THROW(apply_H(s, l, 0.05), ConfigError);
}

TEST(ApplyH, ContinuityInRadius) {
    // Consecutive windows differ by one row and column of K L; the jump is bounded
    // by ||K L|| and shrinks as the grid refines.
    double prev_max = INFINITY;
    for (int n : {16, 32, 64}) {
        const TimeGrid g(0.6, n);
        const BcStack s(g);
        const Matrix l = oracle::unit_speed_map(g);
        const double kl = oracle::max_singular_value(apply_K(s, l));
        double max_jump = 0.0;
        for (int j = 0; j < n; ++j) {
            const double jump =
                oracle::max_singular_value(apply_H(s, l, (j + 1) * g.h()) - apply_H(s, l, j * g.h()));
            EXPECT_LE(jump, kl + 1e-12);
            max_jump = std::max(max_jump, jump);
        }
        EXPECT_LT(max_jump, prev_max);
        prev_max = max_jump;
    }
}
