#include "test_support.hpp"

#include <sstream>

using namespace hdm;
using hdm::test::heat;
using hdm::test::kind_of;

TEST(NoiseSchedule, TwoStepEndpoints) {
    const auto s = linear_schedule(2);
    EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
    EXPECT_DOUBLE_EQ(s.beta(2), 0.02);
    EXPECT_NEAR(s.alpha_bar(2), 0.979902, 1e-15);
    EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(NoiseSchedule, ThousandStepRegression) {
    // product evaluated once at 50 digits
    const auto s = linear_schedule(1000);
    EXPECT_NEAR(s.alpha_bar(1000), 4.0358297653756833e-5, 1e-17);
    EXPECT_LT(s.alpha_bar(1000), 0.01);
}

TEST(NoiseSchedule, MonotoneAndBetaTilde) {
    const auto s = linear_schedule(50);
    EXPECT_EQ(s.beta_tilde(1), 0.0);
    for (int n = 1; n <= 50; ++n) {
        EXPECT_LT(s.alpha_bar(n), s.alpha_bar(n - 1));
        if (n > 1) EXPECT_GT(s.beta_tilde(n), 0.0);
        EXPECT_LE(s.beta_tilde(n), s.beta(n));
    }
}

TEST(NoiseSchedule, RejectsBadInput) {
    EXPECT_EQ(kind_of([] { linear_schedule(1); }), ErrorKind::InvalidParams);
    EXPECT_EQ(kind_of([] { NoiseSchedule({0.1, 1.0}); }), ErrorKind::InvalidParams);
    const auto s = linear_schedule(5);
    EXPECT_EQ(kind_of([&] { s.check_step(0); }), ErrorKind::InvalidParams);
    EXPECT_EQ(kind_of([&] { s.check_step(6); }), ErrorKind::InvalidParams);
}

TEST(NoiseSchedule, CsvHeader) {
    std::ostringstream out;
    write_schedule_csv(out, linear_schedule(3));
    EXPECT_EQ(out.str().substr(0, 23), "n,beta,alpha,alpha_bar\n");
}

TEST(MatrixPower, CubeMatchesRepeatedApply) {
    const auto ops = heat(3, 3, 0.0625);
    Matrix naive = Matrix::Identity(9, 9);
    for (int k = 0; k < 3; ++k) naive = apply_propagator(ops, naive);
    EXPECT_LE(relative_difference(matrix_power(ops, 3), naive), 1e-14);
}

TEST(MatrixPower, NegativeRoundTrip) {
    const auto ops = heat(3, 3, 0.0625);
    const Matrix I = Matrix::Identity(9, 9);
    EXPECT_LE((matrix_power(ops, 2) * matrix_power(ops, -2) - I).norm() / I.norm(), 1e-9);
}

TEST(MatrixPower, GroupProperty) {
    const auto ops = heat(3, 3, 0.095);
    for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b)
            EXPECT_LE(relative_difference(matrix_power(ops, a) * matrix_power(ops, b), matrix_power(ops, a + b)),
                      1e-12)
                << a << " " << b;
}

TEST(PowerCursor, WalkMatchesDirectPowers) {
    const auto ops = heat(4, 4, 0.0625);
    const auto s = linear_schedule(20);
    auto c = cursor_at(ops, s, 20);
    while (c.n > 1) c = cursor_step_down(std::move(c));
    EXPECT_LE(relative_difference(c.A_pow_n, matrix_power(ops, 1)), 1e-10);
    EXPECT_LE(relative_difference(c.A_pow_n_minus_N, matrix_power(ops, -19)), 1e-10);
    EXPECT_LE(relative_difference(c.A_pow_N_minus_n, matrix_power(ops, 19)), 1e-10);
    EXPECT_EQ(kind_of([&] { cursor_step_down(c); }), ErrorKind::CursorUnderflow);
}

TEST(PowerCursor, ResyncOnLongWalk) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(200);
    auto c = cursor_at(ops, s, 200);
    while (c.n > 1) c = cursor_step_down(std::move(c));
    EXPECT_LE(relative_difference(c.A_pow_n_minus_N, matrix_power(ops, -199)), 1e-8);
}
