#include "test_support.hpp"

using namespace hdm;
using hdm::test::heat;
using hdm::test::kind_of;

TEST(ReversePosterior, FrozenSigmaAndMean2x2) {
    // joint-Gaussian conditioning evaluated at 50 digits, K = 0.0625, N = 5, n = 3
    const auto ops = heat(2, 2, 0.0625);
    const auto s = linear_schedule(5);
    const double d = 0.026963957937234249, e = -0.017508911217141148, f = 0.011481360812111391;
    Matrix expected(4, 4);
    expected << d, e, e, f, e, d, f, e, e, f, d, e, f, e, e, d;
    EXPECT_LE(relative_difference(posterior_sigma(ops, s, 3), expected), 1e-12);

    const auto m = posterior_mean_operators(ops, s, 3);
    const double gain_row[4] = {0.44435591322543602, -0.056554388955964585, -0.056554388955964585,
                                0.008079198422280655};
    const double u0_row[4] = {0.42445823106953157, 0.10570673855997558, 0.10570673855997558,
                              0.024795407810364642};
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(m.on_u_n(0, j), gain_row[j], 1e-12);
        EXPECT_NEAR(m.on_u0(0, j), u0_row[j], 1e-12);
    }
}

TEST(ReversePosterior, MatchesBruteForceConditioning) {
    const auto s = linear_schedule(5);
    for (double K : {0.0625, 0.095}) {
        const auto ops = heat(2, 2, K);
        for (int n = 2; n <= 5; ++n) {
            const auto oracle = brute_force_posterior(ops, s, n);
            const auto m = posterior_mean_operators(ops, s, n);
            EXPECT_LE(relative_difference(posterior_sigma(ops, s, n), oracle.Sigma), 1e-8) << K << " " << n;
            EXPECT_LE(relative_difference(m.on_u_n, oracle.mean_op_u_n), 1e-8);
            EXPECT_LE(relative_difference(m.on_u0, oracle.mean_op_u0), 1e-8);
        }
    }
}

TEST(ReversePosterior, ZeroKIsClassical) {
    const auto ops = heat(3, 3, 0.0);
    const auto s = linear_schedule(10);
    const Matrix I = Matrix::Identity(9, 9);
    const int n = 5;
    const double a = s.alpha(n), ab = s.alpha_bar(n), abp = s.alpha_bar(n - 1), b = s.beta(n);
    EXPECT_LE((posterior_sigma(ops, s, n) - s.beta_tilde(n) * I).cwiseAbs().maxCoeff(), 1e-12);
    const auto m = posterior_mean_operators(ops, s, n);
    EXPECT_LE((m.on_u0 - std::sqrt(abp) * b / (1 - ab) * I).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((m.on_u_n - std::sqrt(a) * (1 - abp) / (1 - ab) * I).cwiseAbs().maxCoeff(), 1e-12);

    const auto st = step_matrices(ops, s, n);
    EXPECT_LE((st.C - I / std::sqrt(a)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((st.D + b / (std::sqrt(a) * std::sqrt(1 - ab)) * I).cwiseAbs().maxCoeff(), 1e-12);
    const double weight = b * b / (s.beta_tilde(n) * a * (1 - ab));
    EXPECT_LE((st.W - weight * I).cwiseAbs().maxCoeff(), 1e-9 * weight);
}

TEST(ReversePosterior, SigmaIsScaledPreviousNoiseShape) {
    // A^T B_n^-1 A = B_{n-1}^-1 gives Sigma_n = beta_tilde_n B_{n-1}
    const auto ops = heat(3, 3, 0.095);
    const auto s = linear_schedule(8);
    for (int n = 2; n <= 8; ++n)
        EXPECT_LE(relative_difference(posterior_sigma(ops, s, n), s.beta_tilde(n) * noise_shape_B(ops, s, n - 1)),
                  1e-10)
            << n;
}

TEST(ReversePosterior, WeightIsScalarForLaterSteps) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(8);
    for (int n = 2; n <= 8; ++n) {
        const double scalar = s.beta(n) / (s.alpha(n) * (1 - s.alpha_bar(n - 1)));
        EXPECT_LE(relative_difference(step_matrices(ops, s, n).W, scalar * Matrix::Identity(9, 9)), 1e-9) << n;
    }
}

TEST(ReversePosterior, ReparameterizedMean) {
    const auto ops = heat(3, 3, 0.095);
    const auto s = linear_schedule(5);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick(2, 5);
    for (int draw = 0; draw < 50; ++draw) {
        const int n = pick(rng);
        const Matrix u_n = standard_normal(9, 1, rng);
        const Matrix e_n = standard_normal(9, 1, rng);
        const double ab = s.alpha_bar(n);
        const Matrix u0 =
            (matrix_power(ops, -n) * u_n - std::sqrt(1 - ab) * matrix_power(ops, -5) * e_n) / std::sqrt(ab);
        const auto mu = posterior_mean(ops, s, n, {ops.shape, u_n}, {ops.shape, u0});
        const auto m = step_matrices(ops, s, n);
        EXPECT_LE(relative_difference(m.C * u_n + m.D * e_n, mu.data), 1e-8);
    }
}

TEST(ReversePosterior, FirstStepInvertsTheJump) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(5);
    const auto m = step_matrices(ops, s, 1);
    EXPECT_TRUE(m.Sigma.isIdentity(0.0));
    EXPECT_TRUE(m.L.isIdentity(0.0));
    std::mt19937_64 rng(12);
    const ImageField u0(ops.shape, standard_normal(9, 1, rng));
    const Matrix e = standard_normal(9, 1, rng);
    const auto u1 = forward_jump_with_noise(ops, s, u0, 1, e);
    EXPECT_LE((m.C * u1.u_n.data + m.D * e - u0.data).norm(), 1e-10);
    EXPECT_LE(relative_difference(m.W, m.D.transpose() * m.D), 1e-14);
}

TEST(ReversePosterior, WeightSymmetricPsd) {
    const auto ops = heat(3, 3, 0.095);
    const auto s = linear_schedule(5);
    for (int n : {1, 3, 5}) {
        const Matrix W = step_matrices(ops, s, n).W;
        EXPECT_LE(relative_asymmetry(W), 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(W);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10) << n;
    }
}

TEST(ReversePosterior, RawSigmaNearlySymmetric) {
    const auto ops = heat(3, 3, 0.095);
    const auto s = linear_schedule(5);
    for (int n = 2; n <= 5; ++n) EXPECT_LE(posterior_sigma_raw_asymmetry(ops, s, n), 1e-10);
}

TEST(ReversePosterior, CholeskyReproducesSigma) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(10);
    const auto m = step_matrices(ops, s, 6);
    EXPECT_LE(relative_difference(m.L * m.L.transpose(), m.Sigma), 1e-12);
    EXPECT_TRUE(m.L.isLowerTriangular(0.0));
}

TEST(ReversePosterior, RejectsDeltaStepForMean) {
    const auto ops = heat(2, 2, 0.0625);
    const auto s = linear_schedule(5);
    EXPECT_EQ(kind_of([&] { posterior_mean_operators(ops, s, 1); }), ErrorKind::InvalidParams);
    EXPECT_EQ(kind_of([&] { brute_force_posterior(ops, s, 1); }), ErrorKind::InvalidParams);
    const auto big = heat(4, 4, 0.0625);
    EXPECT_EQ(kind_of([&] { brute_force_posterior(big, s, 2); }), ErrorKind::InvalidParams);
}

TEST(StepCache, EvictsLeastRecentlyUsed) {
    const auto ops = heat(2, 2, 0.0625);
    const auto s = linear_schedule(6);
    StepCache cache(ops, s, 2);
    const auto first = cache.get(3);
    EXPECT_EQ(cache.get(3), first);
    cache.get(4);
    cache.get(3);
    cache.get(5);  // evicts 4
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_EQ(cache.get(3), first);
    EXPECT_LE(relative_difference(first->C, step_matrices(ops, s, 3).C), 0.0);
}
