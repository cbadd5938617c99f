#include "test_support.hpp"

#include <filesystem>
#include <sstream>

using namespace hdm;
using hdm::test::heat;

TEST(Pipeline, TrainSaveLoadSample) {
    const auto ops = heat(6, 6, 0.0625);
    const auto s = linear_schedule(10);
    const auto data = gaussian_blobs(ops.shape, 40, 3);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.N = 10;
    cfg.seed = 5;
    StepCache cache(ops, s);
    const auto trained = train(data, cfg, ops, s, LinearPredictor(36), cache);
    EXPECT_EQ(trained.log.size(), 80u);

    const auto path = (std::filesystem::temp_directory_path() / "hdm_pipeline.bin").string();
    save_predictor(path, trained.predictor, ops.shape, 1);
    const auto loaded = load_predictor(path, ops.shape, 1);

    const auto a = sample(ops, s, trained.predictor, 17);
    const auto b = sample(ops, s, loaded, 17);
    EXPECT_EQ(a.u0.data, b.u0.data);
    EXPECT_TRUE(a.u0.data.allFinite());
}

TEST(Pipeline, ForwardThenExactReverseRecoversImage) {
    // with the true noise and no injected randomness the n = 1 step undoes the jump exactly
    const auto ops = heat(5, 5, 0.095);
    const auto s = linear_schedule(12);
    const auto u0 = gaussian_blobs(ops.shape, 1, 8).front();
    std::mt19937_64 rng(8);
    const auto fwd = forward_jump(ops, s, u0, 1, rng);
    const auto back = denoise_from(ops, s, OraclePredictor{fwd.e_n}, fwd.u_n, 1, rng);
    EXPECT_LE((back.data - u0.data).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pipeline, ZeroKSamplerTracksClassicalTrajectory) {
    const auto ops = heat(3, 3, 0.0);
    const auto s = linear_schedule(10);
    const auto run = sample(ops, s, ZeroPredictor{}, 21);
    EXPECT_EQ(run.u0.data, sample(ops, s, ZeroPredictor{}, 21).u0.data);

    // classical ancestral sampler replaying the same draws
    std::mt19937_64 rng(21);
    Matrix u = standard_normal(9, 1, rng);
    for (int n = 10; n >= 1; --n) {
        const Matrix z = n > 1 ? standard_normal(9, 1, rng) : Matrix::Zero(9, 1);
        u = u / std::sqrt(s.alpha(n)) + (n > 1 ? std::sqrt(s.beta_tilde(n)) : 0.0) * z;
    }
    EXPECT_LE((run.u0.data - u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pipeline, PropertySuitePassesForHeatOperator) {
    CheckOptions o;
    o.fast = true;
    for (const auto& r : run_property_checks(o)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
    o.K = 0.095;
    for (const auto& r : run_property_checks(o)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Pipeline, AblationBreaksGreensValidation) {
    CheckOptions o;
    o.ablation = Ablation::RandomMatrix;
    const auto r = checks::greens_validation(o);
    EXPECT_FALSE(r.passed) << r.detail;
}
