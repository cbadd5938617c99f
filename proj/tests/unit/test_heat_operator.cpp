#include "test_support.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace hdm;
using hdm::test::heat;
using hdm::test::kind_of;

namespace {

// Reflected-neighbour counts for the 3x3 grid, row-major numbering.
constexpr int kNeighbours3x3[9][9] = {
    {0, 2, 0, 2, 0, 0, 0, 0, 0},
    {1, 0, 1, 0, 2, 0, 0, 0, 0},
    {0, 2, 0, 0, 0, 2, 0, 0, 0},
    {1, 0, 0, 0, 2, 0, 1, 0, 0},
    {0, 1, 0, 1, 0, 1, 0, 1, 0},
    {0, 0, 1, 0, 2, 0, 0, 0, 1},
    {0, 0, 0, 2, 0, 0, 0, 2, 0},
    {0, 0, 0, 0, 2, 0, 1, 0, 1},
    {0, 0, 0, 0, 0, 2, 0, 2, 0},
};

}  // namespace

TEST(HeatOperator, Explicit3x3AtK01) {
    const auto ops = heat(3, 3, 0.1);
    const double s_off[3] = {0.0, -0.05, -0.1};
    const double t_off[3] = {0.0, 0.05, 0.1};
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c) {
            const double s = r == c ? 1.2 : s_off[kNeighbours3x3[r][c]];
            const double t = r == c ? 0.8 : t_off[kNeighbours3x3[r][c]];
            EXPECT_NEAR(ops.S(r, c), s, 1e-15) << r << "," << c;
            EXPECT_NEAR(ops.T(r, c), t, 1e-15) << r << "," << c;
        }
}

TEST(HeatOperator, Frozen2x2Propagator) {
    // exact values 71/90, 1/10, 1/90 from a 50-digit evaluation
    const auto ops = heat(2, 2, 0.0625);
    const double d = 71.0 / 90.0, e = 0.1, f = 1.0 / 90.0;
    Matrix expected(4, 4);
    expected << d, e, e, f, e, d, f, e, e, f, d, e, f, e, e, d;
    EXPECT_LE((ops.A - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HeatOperator, RowSumsAcrossSweep) {
    for (int side : {3, 8, 17})
        for (double K : {0.01, 0.0625, 0.095, 0.124}) {
            const auto ops = heat(side, side, K);
            EXPECT_LE(max_row_sum_deviation(ops), 1e-12) << side << " " << K;
            const Vector ones = Vector::Ones(ops.size());
            EXPECT_LE((ops.A * ones - ones).cwiseAbs().maxCoeff(), 1e-10);
        }
}

TEST(HeatOperator, StableAndInvertible4x4) {
    const auto ops = heat(4, 4, 0.095);
    const Vector ones = Vector::Ones(16);
    EXPECT_LE((ops.A * ones - ones).cwiseAbs().maxCoeff(), 1e-12);
    // independent dense eigenvalues
    Eigen::EigenSolver<Matrix> es(ops.A);
    EXPECT_LE(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0 + 1e-12);
}

TEST(HeatOperator, StabilitySweep6x6) {
    for (double K : {0.01, 0.0625, 0.095, 0.124}) {
        const auto ops = heat(6, 6, K);
        EXPECT_LE(spectral_radius(ops.A), 1.0 + 1e-10);
        EXPECT_GT(min_singular_value(ops.A), 0.0);
    }
}

TEST(HeatOperator, ZeroKIsIdentity) {
    const auto ops = heat(4, 3, 0.0);
    EXPECT_TRUE(ops.is_identity());
    EXPECT_TRUE(ops.S.isIdentity(0.0));
}

TEST(HeatOperator, ApplyMatchesDenseMultiply) {
    const auto ops = heat(5, 5, 0.095);
    Matrix u = Matrix::Zero(25, 1);
    u(12, 0) = 1.0;
    EXPECT_LE((apply_propagator(ops, u) - ops.A * u).norm(), 1e-14);
}

TEST(HeatOperator, InverseRoundTrip) {
    const auto ops = heat(8, 8, 0.095);
    std::mt19937_64 rng(3);
    const Matrix u = standard_normal(64, 2, rng);
    const Matrix back = ops.A * apply_inverse_propagator(ops, u);
    EXPECT_LE((back - u).norm() / u.norm(), 1e-10);
}

TEST(HeatOperator, ExplicitSchemeNeedsNoSolve) {
    const auto ops = heat(3, 3, 0.05, 1.0);
    EXPECT_TRUE(ops.S.isIdentity(0.0));
    EXPECT_LE((ops.A - ops.T).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HeatOperator, FixedZeroBoundaryLosesMass) {
    SchemeParams p;
    p.K = 0.0625;
    p.boundary = Boundary::FixedZero;
    const auto ops = build_operators({4, 4}, p);
    const Vector ones = Vector::Ones(16);
    EXPECT_LT((ops.A * ones).sum(), 16.0 - 1e-3);
}

TEST(HeatOperator, RejectsBadParameters) {
    SchemeParams p;
    p.K = 0.125;
    EXPECT_EQ(kind_of([&] { build_operators({4, 4}, p); }), ErrorKind::InvalidParams);
    p.K = -0.01;
    EXPECT_EQ(kind_of([&] { build_operators({4, 4}, p); }), ErrorKind::InvalidParams);
    p.K = 0.05;
    p.theta = 1.5;
    EXPECT_EQ(kind_of([&] { build_operators({4, 4}, p); }), ErrorKind::InvalidParams);
    p.theta = 0.5;
    EXPECT_EQ(kind_of([&] { build_operators({1, 4}, p); }), ErrorKind::InvalidParams);
}

TEST(HeatOperator, SingularSubstituteRejected) {
    SchemeParams p;
    Matrix T = Matrix::Ones(4, 4) / 4.0;
    EXPECT_EQ(kind_of([&] { assemble_operator_set({2, 2}, p, Matrix::Identity(4, 4), T, true); }),
              ErrorKind::SingularOperator);
}

TEST(HeatOperator, RandomMatrixIsRowStochasticAndSeeded) {
    const Matrix a = random_row_stochastic(9, 7);
    const Matrix b = random_row_stochastic(9, 7);
    const Matrix c = random_row_stochastic(9, 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_GE(a.minCoeff(), 0.0);
    EXPECT_LE((a.rowwise().sum() - Vector::Ones(9)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HeatOperator, SelectK) {
    EXPECT_EQ(select_K(0.5, 2), 0.0625);
    EXPECT_EQ(kind_of([] { select_K(1.0 / std::sqrt(2.0), 2); }), ErrorKind::InvalidParams);
    EXPECT_EQ(kind_of([] { select_K(0.8, 2); }), ErrorKind::InvalidParams);
    EXPECT_EQ(kind_of([] { select_K(0.0, 2); }), ErrorKind::InvalidParams);
    EXPECT_LT(select_K(0.7, 2), kMaxSupportedK);
}

TEST(HeatOperator, GreensFunctionAnalytic) {
    GreensFunctionQuery q{0.25, 2, 0.0, 1.0};
    EXPECT_NEAR(greens_function(q), 1.0 / (4.0 * std::numbers::pi * 0.25), 1e-15);
    EXPECT_DOUBLE_EQ(greens_peak_time(2.0, 2, 0.0625), 16.0);
    // the peak in t at fixed x
    GreensFunctionQuery lo{0.0625, 2, 2.0, 15.0}, at{0.0625, 2, 2.0, 16.0}, hi{0.0625, 2, 2.0, 17.0};
    EXPECT_GT(greens_function(at), greens_function(lo));
    EXPECT_GT(greens_function(at), greens_function(hi));
}

TEST(HeatOperator, GreensPeakOn33x33) {
    const auto ops = heat(33, 33, 0.0625);
    const auto r = validate_against_greens(ops, 32);
    ASSERT_TRUE(r.peak_step.has_value());
    EXPECT_NEAR(r.expected_peak_step, 16.0, 1e-12);
    EXPECT_TRUE(greens_peak_matches(r));
    EXPECT_LT(r.l2_error, 0.1);
}

TEST(HeatOperator, OperatorCacheRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "hdm_test_cache";
    std::filesystem::create_directories(dir);
    const auto ops = heat(3, 4, 0.095);
    const auto path = (dir / operator_cache_name(ops.shape, ops.params)).string();
    save_operator_cache(path, ops);
    const auto loaded = load_operator_cache(path, ops.shape, ops.params);
    ASSERT_TRUE(loaded.has_value());
    EXPECT_EQ(loaded->A, ops.A);
    EXPECT_EQ(loaded->S, ops.S);
    SchemeParams other = ops.params;
    other.K = 0.0951;
    EXPECT_FALSE(load_operator_cache(path, ops.shape, other).has_value());
    EXPECT_NE(operator_cache_name(ops.shape, ops.params), operator_cache_name(ops.shape, other));
}
