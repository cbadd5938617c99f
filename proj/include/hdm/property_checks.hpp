#pragma once

// Self-check suite behind `hdm check`: operator invariants, oracle equivalences,
// DDPM reduction, gradient and Monte-Carlo checks. Each check reports pass/fail and
// a one-line detail; numeric failures inside a check are reported, not rethrown.

#include "hdm/forward_process.hpp"
#include "hdm/heat_operator.hpp"
#include "hdm/noise_schedule.hpp"
#include "hdm/predictor.hpp"
#include "hdm/reverse_posterior.hpp"
#include "hdm/run_config.hpp"
#include "hdm/sampler.hpp"
#include "hdm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace hdm {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct CheckOptions {
    double theta = 0.5;
    double K = 0.0625;
    Ablation ablation = Ablation::None;
    std::uint64_t seed = 0;
    bool fast = false;  // skip Monte-Carlo checks
};

namespace checks {

inline std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

inline OperatorSet operators_for(const CheckOptions& o, GridShape shape) {
    SchemeParams p{o.theta, o.K, Boundary::Adiabatic, std::nullopt};
    if (o.ablation == Ablation::RandomMatrix) return build_random_operators(shape, p, o.seed);
    return build_operators(shape, p);
}

/// Printed 3x3 adiabatic layout: 9 = diagonal, 1 = single neighbour, 2 = doubled neighbour.
inline constexpr int kExplicitLayout[9][9] = {
    {9, 2, 0, 2, 0, 0, 0, 0, 0}, {1, 9, 1, 0, 2, 0, 0, 0, 0}, {0, 2, 9, 0, 0, 2, 0, 0, 0},
    {1, 0, 0, 9, 2, 0, 1, 0, 0}, {0, 1, 0, 1, 9, 1, 0, 1, 0}, {0, 0, 1, 0, 2, 9, 0, 0, 1},
    {0, 0, 0, 2, 0, 0, 9, 2, 0}, {0, 0, 0, 0, 2, 0, 1, 9, 1}, {0, 0, 0, 0, 0, 2, 0, 2, 9},
};

inline CheckResult explicit_matrices(const CheckOptions& o) {
    const double th = o.theta, K = o.K;
    const auto ops = build_operators({3, 3}, {th, K, Boundary::Adiabatic, std::nullopt});
    double worst = 0.0;
    for (int r = 0; r < 9; ++r)
        for (int c = 0; c < 9; ++c) {
            const int code = kExplicitLayout[r][c];
            const double s = code == 9 ? 1 + 4 * (1 - th) * K : code * (th - 1) * K;
            const double t = code == 9 ? 1 - 4 * th * K : code * th * K;
            worst = std::max({worst, std::abs(ops.S(r, c) - s), std::abs(ops.T(r, c) - t)});
        }
    return {"explicit 3x3 S/T", worst <= 1e-15, fmt("max entry error %.3g", worst)};
}

inline CheckResult adiabatic_invariants(const CheckOptions& o) {
    const auto ops = operators_for(o, {8, 8});
    const double rows = max_row_sum_deviation(ops);
    const double fixed = (ops.A * Vector::Ones(ops.size()) - Vector::Ones(ops.size())).cwiseAbs().maxCoeff();
    return {"row sums and A1 = 1", rows <= 1e-12 && fixed <= 1e-10,
            fmt("row-sum deviation %.3g, |A1 - 1| %.3g", rows, fixed)};
}

inline CheckResult stability(const CheckOptions& o) {
    const auto ops = operators_for(o, {6, 6});
    const double rho = spectral_radius(ops.A);
    const double smin = min_singular_value(ops.A);
    return {"spectral radius and invertibility", rho <= 1.0 + 1e-10 && smin > 0.0,
            fmt("rho(A) %.15g, sigma_min %.3g", rho, smin)};
}

inline CheckResult telescoping(const CheckOptions&) {
    const auto s = linear_schedule(1000);
    double worst = 0.0;
    for (int n = 1; n <= s.steps(); ++n) {
        double acc = s.alpha_bar(n);
        for (int k = 1; k <= n; ++k) acc += (s.alpha_bar(n) / s.alpha_bar(k)) * (1.0 - s.alpha(k));
        worst = std::max(worst, std::abs(acc - 1.0));
    }
    return {"telescoping variance identity", worst <= 1e-12, fmt("max deviation %.3g", worst)};
}

inline CheckResult ddpm_collapse(const CheckOptions& o) {
    const auto ops = build_operators({3, 3}, {o.theta, 0.0, Boundary::Adiabatic, std::nullopt});
    const auto s = linear_schedule(10);
    const Eigen::Index P = ops.size();
    const Matrix I = Matrix::Identity(P, P);
    std::mt19937_64 rng(o.seed);
    double worst = 0.0;
    for (int n : {2, 5, 10}) {
        const double a = s.alpha(n), ab = s.alpha_bar(n), b = s.beta(n);
        const double bt = s.beta_tilde(n);
        const auto m = step_matrices(ops, s, n);
        worst = std::max(worst, (m.Sigma - bt * I).cwiseAbs().maxCoeff());
        worst = std::max(worst, (m.C - I / std::sqrt(a)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (m.D + b / (std::sqrt(a) * std::sqrt(1 - ab)) * I).cwiseAbs().maxCoeff());
        worst = std::max(worst, (m.W - (b * b / (bt * a * (1 - ab))) * I).cwiseAbs().maxCoeff());

        const ImageField u0(ops.shape, standard_normal(P, 1, rng));
        const Matrix e = standard_normal(P, 1, rng);
        const auto fwd = forward_jump_with_noise(ops, s, u0, n, e);
        worst = std::max(worst, (fwd.u_n.data - (std::sqrt(ab) * u0.data + std::sqrt(1 - ab) * e)).cwiseAbs().maxCoeff());

        const Matrix e_hat = standard_normal(P, 1, rng);
        const Matrix z = standard_normal(P, 1, rng);
        const Matrix step = reverse_step(m, fwd.u_n.data, e_hat, z);
        const Matrix classical =
            (fwd.u_n.data - b / std::sqrt(1 - ab) * e_hat) / std::sqrt(a) + std::sqrt(bt) * z;
        worst = std::max(worst, (step - classical).cwiseAbs().maxCoeff());
    }
    return {"DDPM collapse at K=0", worst <= 1e-10, fmt("max deviation %.3g", worst)};
}

inline CheckResult posterior_oracle(const CheckOptions& o) {
    const auto ops = operators_for(o, {2, 2});
    const auto s = linear_schedule(5);
    double worst = 0.0;
    for (int n = 2; n <= 5; ++n) {
        const auto formula = posterior_mean_operators(ops, s, n);
        const Matrix sigma = posterior_sigma(ops, s, n);
        const auto oracle = brute_force_posterior(ops, s, n);
        worst = std::max({worst, relative_difference(sigma, oracle.Sigma),
                          relative_difference(formula.on_u_n, oracle.mean_op_u_n),
                          relative_difference(formula.on_u0, oracle.mean_op_u0)});
    }
    const Vector sv = Eigen::BDCSVD<Matrix>(matrix_power(ops, s.steps() - 1)).singularValues();
    const double cond = sv.maxCoeff() / sv.minCoeff();
    return {"posterior formula vs Schur-complement oracle", worst <= 1e-8,
            fmt("max relative difference %.3g, cond(A^(N-1)) %.3g", worst, cond)};
}

inline CheckResult reparameterization(const CheckOptions& o) {
    const auto ops = operators_for(o, {3, 3});
    const auto s = linear_schedule(5);
    std::mt19937_64 rng(o.seed + 1);
    std::uniform_int_distribution<int> pick(2, s.steps());
    const Eigen::Index P = ops.size();
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        const int n = pick(rng);
        const Matrix u_n = standard_normal(P, 1, rng);
        const Matrix e_n = standard_normal(P, 1, rng);
        const double ab = s.alpha_bar(n);
        const Matrix u0 = (matrix_power(ops, -n) * u_n - std::sqrt(1 - ab) * matrix_power(ops, -s.steps()) * e_n) /
                          std::sqrt(ab);
        const auto mu = posterior_mean(ops, s, n, {ops.shape, u_n}, {ops.shape, u0});
        const auto m = step_matrices(ops, s, n);
        worst = std::max(worst, relative_difference(m.C * u_n + m.D * e_n, mu.data));
    }
    return {"reparameterization C u + D e = mu", worst <= 1e-8, fmt("max relative difference %.3g", worst)};
}

inline CheckResult gradient_check(const CheckOptions& o) {
    const auto ops = operators_for(o, {2, 2});
    const auto s = linear_schedule(5);
    std::mt19937_64 rng(o.seed + 2);
    std::uniform_int_distribution<int> pick(1, s.steps());
    const Eigen::Index P = ops.size();
    double worst = 0.0;
    const double h = 1e-5;
    for (int draw = 0; draw < 20; ++draw) {
        const int n = pick(rng);
        const Matrix W = step_matrices(ops, s, n).W;
        LinearPredictor p(P);
        p.Wu = standard_normal(P, P, rng);
        p.wt = standard_normal(P, 1, rng);
        p.b = standard_normal(P, 1, rng);
        const ImageField u(ops.shape, standard_normal(P, 1, rng));
        const Matrix e = standard_normal(P, 1, rng);
        const PredictorInput in{u, n, s.steps()};
        const auto loss = [&](const LinearPredictor& q) { return weighted_loss(W, e, q.predict(in)); };
        const auto g = gradient(p, in, -2.0 * W * (e - p.predict(in)));
        const auto compare = [&](double analytic, double fd) {
            if (std::abs(fd) > 1e-8) worst = std::max(worst, std::abs(analytic - fd) / std::abs(fd));
        };
        for (Eigen::Index i = 0; i < P; ++i) {
            for (Eigen::Index j = 0; j < P; ++j) {
                LinearPredictor plus = p, minus = p;
                plus.Wu(i, j) += h;
                minus.Wu(i, j) -= h;
                compare(g.dWu(i, j), (loss(plus) - loss(minus)) / (2 * h));
            }
            LinearPredictor plus = p, minus = p;
            plus.b(i) += h;
            minus.b(i) -= h;
            compare(g.db(i), (loss(plus) - loss(minus)) / (2 * h));
            plus = p;
            minus = p;
            plus.wt(i) += h;
            minus.wt(i) -= h;
            compare(g.dwt(i), (loss(plus) - loss(minus)) / (2 * h));
        }
    }
    return {"linear predictor gradient vs finite differences", worst <= 1e-4, fmt("max relative error %.3g", worst)};
}

inline CheckResult greens_validation(const CheckOptions& o) {
    const auto ops = operators_for(o, {33, 33});
    const int steps = o.K > 0.0 ? int(std::ceil(2.0 * greens_peak_time(2.0, 2, o.K))) : 16;
    const auto r = validate_against_greens(ops, steps, 2);
    const bool ok = greens_peak_matches(r);
    std::string detail = fmt("expected peak %.2f, observed ", r.expected_peak_step);
    detail += r.peak_step ? std::to_string(*r.peak_step) : std::string("none");
    detail += fmt(", relative L2 error %.3g", r.l2_error);
    return {"Green's function peak time", ok, detail};
}

/// Entrywise z-scores of an empirical covariance against the target; returns the largest.
inline double max_covariance_zscore(const Matrix& samples, const Matrix& target) {
    const double m = double(samples.cols());
    const Vector mean = samples.rowwise().mean();
    const Matrix centered = samples.colwise() - mean;
    const Matrix emp = centered * centered.transpose() / (m - 1.0);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < target.rows(); ++i)
        for (Eigen::Index j = 0; j < target.cols(); ++j) {
            const double se = std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / m);
            worst = std::max(worst, std::abs(emp(i, j) - target(i, j)) / se);
        }
    return worst;
}

inline CheckResult mc_forward_covariance(const CheckOptions& o) {
    const auto ops = operators_for(o, {2, 2});
    const auto s = linear_schedule(5);
    const int n = 3, draws = 200000;
    std::mt19937_64 rng(o.seed + 3);
    const ImageField u0(ops.shape, standard_normal(ops.size(), 1, rng));
    Matrix samples(ops.size(), draws);
    for (int k = 0; k < draws; ++k) samples.col(k) = forward_jump(ops, s, u0, n, rng).u_n.data;
    const double z = max_covariance_zscore(samples, forward_kernel_params(ops, s, n).cov_jump);
    return {"Monte-Carlo covariance of forward jump", z <= 5.0, fmt("max z-score %.3g", z)};
}

inline CheckResult mc_cholesky_noise(const CheckOptions& o) {
    const auto ops = operators_for(o, {2, 2});
    const auto s = linear_schedule(5);
    const auto m = step_matrices(ops, s, 3);
    const int draws = 100000;
    std::mt19937_64 rng(o.seed + 4);
    const Matrix samples = m.L * standard_normal(ops.size(), draws, rng);
    const double z = max_covariance_zscore(samples, m.Sigma);
    return {"Monte-Carlo covariance of L z", z <= 5.0, fmt("max z-score %.3g", z)};
}

template <class F>
CheckResult timed(F&& f, const CheckOptions& o, const char* name) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
        r = f(o);
    } catch (const std::exception& e) {
        r = {name, false, e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace checks

inline std::vector<CheckResult> run_property_checks(const CheckOptions& o) {
    using namespace checks;
    std::vector<CheckResult> out;
    out.push_back(timed(explicit_matrices, o, "explicit 3x3 S/T"));
    out.push_back(timed(adiabatic_invariants, o, "row sums and A1 = 1"));
    out.push_back(timed(stability, o, "spectral radius and invertibility"));
    out.push_back(timed(telescoping, o, "telescoping variance identity"));
    out.push_back(timed(ddpm_collapse, o, "DDPM collapse at K=0"));
    out.push_back(timed(posterior_oracle, o, "posterior formula vs Schur-complement oracle"));
    out.push_back(timed(reparameterization, o, "reparameterization C u + D e = mu"));
    out.push_back(timed(gradient_check, o, "linear predictor gradient vs finite differences"));
    out.push_back(timed(greens_validation, o, "Green's function peak time"));
    if (!o.fast) {
        out.push_back(timed(mc_forward_covariance, o, "Monte-Carlo covariance of forward jump"));
        out.push_back(timed(mc_cholesky_noise, o, "Monte-Carlo covariance of L z"));
    }
    return out;
}

}  // namespace hdm
