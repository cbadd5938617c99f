#pragma once

// Theta-scheme discretization of the 2D heat equation on an I x J pixel grid.
//
// A field u is vectorized row-major (index = i*J + j). One time step reads
// S u_{n+1} = T u_n, so the propagator is A = S^-1 T. Under adiabatic
// (zero-flux) boundaries the ghost node mirrors its interior neighbour,
// which doubles that neighbour's stencil weight; corners double on both axes.

#include "hdm/error.hpp"
#include "hdm/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>

namespace hdm {

struct GridShape {
    int rows = 0;  // I
    int cols = 0;  // J

    Eigen::Index size() const { return Eigen::Index(rows) * cols; }
    Eigen::Index index(int i, int j) const { return Eigen::Index(i) * cols + j; }

    friend bool operator==(const GridShape&, const GridShape&) = default;
};

enum class Boundary : std::uint32_t { Adiabatic = 0, FixedZero = 1 };

inline const char* to_string(Boundary b) { return b == Boundary::Adiabatic ? "adiabatic" : "fixed_zero"; }

inline constexpr double kMaxSupportedK = 0.125;
inline constexpr double kSingularConditionLimit = 1e12;

struct SchemeParams {
    double theta = 0.5;
    double K = 0.0625;
    Boundary boundary = Boundary::Adiabatic;
    std::optional<double> gamma;
};

inline void validate(const GridShape& shape) {
    require(shape.rows >= 2 && shape.cols >= 2, ErrorKind::InvalidParams,
            "grid must be at least 2x2, got " + std::to_string(shape.rows) + "x" + std::to_string(shape.cols));
}

inline void validate(const SchemeParams& params) {
    require(params.theta >= 0.0 && params.theta <= 1.0, ErrorKind::InvalidParams,
            "theta must lie in [0, 1], got " + std::to_string(params.theta));
    // K = 0 is the identity propagator (plain DDPM); it is kept for the reduction path.
    require(params.K >= 0.0 && params.K < kMaxSupportedK, ErrorKind::InvalidParams,
            "K must lie in [0, 0.125), got " + std::to_string(params.K));
}

/// Dense S, T and A = S^-1 T with reusable LU factorizations. Immutable once built.
struct OperatorSet {
    GridShape shape;
    SchemeParams params;
    Matrix S;
    Matrix T;
    Matrix A;
    Eigen::PartialPivLU<Matrix> luS;
    Eigen::PartialPivLU<Matrix> luA;
    double condition_S = 1.0;  // 1-norm condition estimates
    double condition_A = 1.0;
    bool ablation = false;  // A is a substituted matrix, not a heat propagator

    Eigen::Index size() const { return shape.size(); }
    bool is_identity() const { return A.isIdentity(0.0); }
};

namespace detail {

inline void assemble_stencil(const GridShape& shape, const SchemeParams& p, Matrix& S, Matrix& T) {
    const Eigen::Index n = shape.size();
    S.setZero(n, n);
    T.setZero(n, n);
    const double s_diag = 1.0 + 4.0 * (1.0 - p.theta) * p.K;
    const double t_diag = 1.0 - 4.0 * p.theta * p.K;
    const double s_off = (p.theta - 1.0) * p.K;
    const double t_off = p.theta * p.K;

    constexpr int di[4] = {-1, 1, 0, 0};
    constexpr int dj[4] = {0, 0, -1, 1};
    for (int i = 0; i < shape.rows; ++i) {
        for (int j = 0; j < shape.cols; ++j) {
            const Eigen::Index row = shape.index(i, j);
            S(row, row) = s_diag;
            T(row, row) = t_diag;
            for (int k = 0; k < 4; ++k) {
                int ni = i + di[k];
                int nj = j + dj[k];
                const bool outside = ni < 0 || ni >= shape.rows || nj < 0 || nj >= shape.cols;
                if (outside) {
                    if (p.boundary == Boundary::FixedZero) continue;
                    // ghost node u^{-1} = u^{1}: reflect onto the interior mirror
                    if (ni < 0) ni = 1;
                    if (ni >= shape.rows) ni = shape.rows - 2;
                    if (nj < 0) nj = 1;
                    if (nj >= shape.cols) nj = shape.cols - 2;
                }
                const Eigen::Index col = shape.index(ni, nj);
                S(row, col) += s_off;
                T(row, col) += t_off;
            }
        }
    }
}

inline double condition_estimate(const Eigen::PartialPivLU<Matrix>& lu) {
    const double rc = lu.rcond();
    return rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
}

inline void factorize(OperatorSet& ops) {
    ops.luS.compute(ops.S);
    ops.condition_S = condition_estimate(ops.luS);
    require(ops.condition_S < kSingularConditionLimit, ErrorKind::SingularOperator,
            "S is numerically singular (condition estimate " + std::to_string(ops.condition_S) + ")");
    ops.A = ops.luS.solve(ops.T);
    ops.luA.compute(ops.A);
    ops.condition_A = condition_estimate(ops.luA);
    require(ops.condition_A < kSingularConditionLimit, ErrorKind::SingularOperator,
            "A is numerically singular (condition estimate " + std::to_string(ops.condition_A) + ")");
}

}  // namespace detail

inline OperatorSet build_operators(const GridShape& shape, const SchemeParams& params) {
    validate(shape);
    validate(params);
    OperatorSet ops;
    ops.shape = shape;
    ops.params = params;
    detail::assemble_stencil(shape, params, ops.S, ops.T);
    detail::factorize(ops);
    return ops;
}

/// Rebuilds the factorizations for matrices loaded from a cache or supplied externally.
inline OperatorSet assemble_operator_set(const GridShape& shape, const SchemeParams& params, Matrix S, Matrix T,
                                         bool ablation = false) {
    validate(shape);
    require(S.rows() == shape.size() && S.cols() == shape.size() && T.rows() == S.rows() && T.cols() == S.cols(),
            ErrorKind::DimensionMismatch, "S/T do not match the grid size");
    OperatorSet ops;
    ops.shape = shape;
    ops.params = params;
    ops.S = std::move(S);
    ops.T = std::move(T);
    ops.ablation = ablation;
    detail::factorize(ops);
    return ops;
}

/// Seeded nonnegative matrix with rows normalized to sum to 1 (A 1 = 1 is kept).
inline Matrix random_row_stochastic(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight(0.0, 1.0);
    Matrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = weight(rng);
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

/// Ablation operator: S = I and T = a random row-stochastic matrix, so A = T.
inline OperatorSet build_random_operators(const GridShape& shape, const SchemeParams& params, std::uint64_t seed) {
    validate(shape);
    validate(params);
    return assemble_operator_set(shape, params, Matrix::Identity(shape.size(), shape.size()),
                                 random_row_stochastic(shape.size(), seed), true);
}

inline Matrix apply_propagator(const OperatorSet& ops, const Matrix& u) {
    require(u.rows() == ops.size(), ErrorKind::DimensionMismatch,
            "field has " + std::to_string(u.rows()) + " entries, grid needs " + std::to_string(ops.size()));
    return ops.A * u;
}

inline Matrix apply_inverse_propagator(const OperatorSet& ops, const Matrix& u) {
    require(u.rows() == ops.size(), ErrorKind::DimensionMismatch,
            "field has " + std::to_string(u.rows()) + " entries, grid needs " + std::to_string(ops.size()));
    return ops.luA.solve(u);
}

// --- diagnostics ---------------------------------------------------------

/// Largest |row sum - 1| over S and T.
inline double max_row_sum_deviation(const OperatorSet& ops) {
    const double s = (ops.S.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double t = (ops.T.rowwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(s, t);
}

inline double spectral_radius(const Matrix& m) {
    Eigen::EigenSolver<Matrix> solver(m, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double min_singular_value(const Matrix& m) {
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues().minCoeff();
}

// --- Green's function and the choice of K --------------------------------

/// K = gamma^2 / 2d, where gamma is the number of grid points heat travels per step.
inline double select_K(double gamma, int d) {
    require(d >= 1, ErrorKind::InvalidParams, "spatial dimension must be positive");
    require(gamma > 0.0 && gamma < 1.0 / std::numbers::sqrt2, ErrorKind::InvalidParams,
            "gamma must satisfy 0 < gamma < 1/sqrt(2), got " + std::to_string(gamma));
    return gamma * gamma / (2.0 * d);
}

struct GreensFunctionQuery {
    double kappa = 1.0;
    int d = 2;
    double x_norm = 0.0;
    double t = 1.0;
};

/// Heat kernel G(x, t) = (4 pi kappa t)^(-d/2) exp(-|x|^2 / 4 kappa t); zero for t <= 0.
inline double greens_function(const GreensFunctionQuery& q) {
    if (q.t <= 0.0) return 0.0;
    const double spread = 4.0 * q.kappa * q.t;
    return std::pow(std::numbers::pi * spread, -0.5 * q.d) * std::exp(-q.x_norm * q.x_norm / spread);
}

/// Time at which G(x, .) peaks for fixed x: |x|^2 / (2 d kappa).
inline double greens_peak_time(double x_norm, int d, double kappa) { return x_norm * x_norm / (2.0 * d * kappa); }

struct GreensReport {
    double l2_error = 0.0;
    std::optional<int> peak_step;  // empty when the probe never warms up
    double expected_peak_step = 0.0;
    int steps = 0;
};

/// Propagates a unit impulse at the grid centre `steps` times with A and compares
/// the field to the sampled heat kernel with kappa*tau/Delta^2 = K.
inline GreensReport validate_against_greens(const OperatorSet& ops, int steps, int probe_offset = 2) {
    require(steps >= 1, ErrorKind::InvalidParams, "steps must be >= 1");
    const GridShape& g = ops.shape;
    const double K = ops.params.K;
    const int half = std::min(g.rows, g.cols) / 2;
    require(probe_offset >= 1 && probe_offset < half, ErrorKind::InvalidParams, "probe offset does not fit the grid");
    // four kernel standard deviations must stay inside the half-width
    require(4.0 * std::sqrt(2.0 * K * steps) < 0.5 * std::min(g.rows, g.cols), ErrorKind::InvalidParams,
            "grid too small for " + std::to_string(steps) + " steps: boundary would influence the impulse");

    const int ci = g.rows / 2;
    const int cj = g.cols / 2;
    const Eigen::Index probe = g.index(ci + probe_offset, cj);

    Vector u = Vector::Zero(g.size());
    u(g.index(ci, cj)) = 1.0;
    double best = 0.0;
    GreensReport report;
    report.steps = steps;
    report.expected_peak_step = K > 0.0 ? greens_peak_time(probe_offset, 2, K) : 0.0;
    for (int s = 1; s <= steps; ++s) {
        u = ops.A * u;
        if (u(probe) > best) {
            best = u(probe);
            report.peak_step = s;
        }
    }

    Vector kernel = Vector::Zero(g.size());
    if (K > 0.0) {
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) {
                const double r = std::hypot(double(i - ci), double(j - cj));
                kernel(g.index(i, j)) = greens_function({K, 2, r, double(steps)});
            }
    } else {
        kernel(g.index(ci, cj)) = 1.0;
    }
    report.l2_error = (u - kernel).norm() / kernel.norm();
    return report;
}

inline bool greens_peak_matches(const GreensReport& r, double tolerance_steps = 2.0) {
    return r.peak_step && std::abs(*r.peak_step - r.expected_peak_step) <= tolerance_steps;
}

}  // namespace hdm
