#include "test_support.hpp"

#include <sstream>

using namespace hdm;
using hdm::test::heat;
using hdm::test::kind_of;

TEST(Trainer, PerfectPredictionHasZeroLoss) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(5);
    std::mt19937_64 rng(31);
    const Matrix e = standard_normal(9, 2, rng);
    for (int n = 1; n <= 5; ++n) EXPECT_EQ(loss_term(ops, s, n, e, e), 0.0);
}

TEST(Trainer, LossMatchesDenseQuadraticForm) {
    const auto ops = heat(2, 2, 0.095);
    const auto s = linear_schedule(5);
    std::mt19937_64 rng(32);
    for (int n = 1; n <= 5; ++n) {
        const Matrix r = standard_normal(4, 1, rng);
        // independent dense path: D and Sigma from the step, Sigma^-1 by full-pivot LU
        const auto m = step_matrices(ops, s, n);
        const Matrix sigma_inv = Eigen::FullPivLU<Matrix>(m.Sigma).inverse();
        const double dense = (r.transpose() * m.D.transpose() * sigma_inv * m.D * r)(0, 0);
        const double got = loss_term(ops, s, n, r, Matrix::Zero(4, 1));
        EXPECT_GE(got, 0.0);
        EXPECT_NEAR(got, dense, 1e-8 * std::max(1.0, dense)) << n;
    }
}

TEST(Trainer, ZeroKLossIsScaledSquaredError) {
    const auto ops = heat(3, 3, 0.0);
    const auto s = linear_schedule(10);
    std::mt19937_64 rng(33);
    const Matrix r = standard_normal(9, 1, rng);
    const int n = 4;
    const double scalar = s.beta(n) * s.beta(n) / (s.beta_tilde(n) * s.alpha(n) * (1 - s.alpha_bar(n)));
    EXPECT_NEAR(loss_term(ops, s, n, r, Matrix::Zero(9, 1)), scalar * r.squaredNorm(), 1e-9 * scalar);
}

TEST(Trainer, DeterministicLogs) {
    const auto ops = heat(4, 4, 0.0625);
    const auto s = linear_schedule(10);
    const auto data = gaussian_blobs(ops.shape, 12, 5);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 2;
    cfg.N = 10;
    cfg.seed = 9;
    StepCache c1(ops, s), c2(ops, s);
    const auto r1 = train(data, cfg, ops, s, LinearPredictor(16), c1);
    const auto r2 = train(data, cfg, ops, s, LinearPredictor(16), c2);
    std::ostringstream a, b;
    write_loss_csv(a, r1.log);
    write_loss_csv(b, r2.log);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(r1.log.size(), 18u);
    for (const auto& rec : r1.log) EXPECT_GE(rec.loss, 0.0);

    cfg.seed = 10;
    StepCache c3(ops, s);
    std::ostringstream c;
    write_loss_csv(c, train(data, cfg, ops, s, LinearPredictor(16), c3).log);
    EXPECT_NE(a.str(), c.str());
}

TEST(Trainer, RunningMeanIsTrailingWindow) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(5);
    const auto data = gaussian_blobs(ops.shape, 150, 1);
    TrainConfig cfg;
    cfg.N = 5;
    StepCache cache(ops, s);
    const auto log = train(data, cfg, ops, s, LinearPredictor(9), cache).log;
    ASSERT_EQ(log.size(), 150u);
    double sum = 0.0;
    for (int k = 30; k < 130; ++k) sum += log[k].loss;
    EXPECT_NEAR(log[129].running_mean, sum / 100.0, 1e-9 * sum);
}

TEST(Trainer, DivergenceIsReported) {
    const auto ops = heat(4, 4, 0.0625);
    const auto s = linear_schedule(20);
    const auto data = gaussian_blobs(ops.shape, 50, 2);
    TrainConfig cfg;
    cfg.eta = 1.0;
    StepCache cache(ops, s);
    EXPECT_EQ(kind_of([&] { train(data, cfg, ops, s, LinearPredictor(16), cache); }),
              ErrorKind::DivergenceDetected);
}

TEST(Trainer, RejectsBadConfig) {
    const auto ops = heat(3, 3, 0.0625);
    const auto s = linear_schedule(5);
    StepCache cache(ops, s);
    TrainConfig cfg;
    cfg.N = 5;
    EXPECT_EQ(kind_of([&] { train({}, cfg, ops, s, LinearPredictor(9), cache); }), ErrorKind::InvalidParams);
    const auto data = gaussian_blobs(ops.shape, 3, 1);
    cfg.N = 6;
    EXPECT_EQ(kind_of([&] { train(data, cfg, ops, s, LinearPredictor(9), cache); }), ErrorKind::InvalidParams);
    cfg.N = 5;
    EXPECT_EQ(kind_of([&] { train(data, cfg, ops, s, LinearPredictor(4), cache); }), ErrorKind::DimensionMismatch);
}
