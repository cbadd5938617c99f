#pragma once

// Forward (noising) process with the heat propagator:
//   single step  u_n = sqrt(a_n) A u_{n-1} + sqrt(1 - a_n) A^(n-N) eps
//   closed form  u_n = sqrt(abar_n) A^n u_0 + sqrt(1 - abar_n) A^(n-N) e_n
// Both laws put the noise under the same power A^(n-N), so their covariance is
// (1 - a_n) B_n and (1 - abar_n) B_n with B_n = A^(n-N) A^(n-N)^T.

#include "hdm/error.hpp"
#include "hdm/heat_operator.hpp"
#include "hdm/linalg.hpp"
#include "hdm/noise_schedule.hpp"

#include <cmath>
#include <string>

namespace hdm {

/// Pixel field in model space. Each column of `data` is one channel vectorized
/// row-major over the grid; every channel is propagated by the same A.
struct ImageField {
    GridShape shape;
    Matrix data;

    ImageField() = default;
    ImageField(GridShape s, Matrix d) : shape(s), data(std::move(d)) {
        require(data.rows() == shape.size(), ErrorKind::DimensionMismatch, "field data does not match grid");
    }

    static ImageField zeros(GridShape s, int channels) { return {s, Matrix::Zero(s.size(), channels)}; }
    static ImageField constant(GridShape s, int channels, double v) { return {s, Matrix::Constant(s.size(), channels, v)}; }

    int channels() const { return int(data.cols()); }
    double& at(int channel, int i, int j) { return data(shape.index(i, j), channel); }
    double at(int channel, int i, int j) const { return data(shape.index(i, j), channel); }
};

struct ForwardSample {
    int n = 0;
    ImageField u_n;
    Matrix e_n;  // the standard-normal draw, same layout as u_n.data
};

namespace detail {

inline void check_field(const OperatorSet& ops, const ImageField& u) {
    require(u.shape == ops.shape && u.data.rows() == ops.size(), ErrorKind::DimensionMismatch,
            "field grid " + std::to_string(u.shape.rows) + "x" + std::to_string(u.shape.cols) +
                " does not match operator grid " + std::to_string(ops.shape.rows) + "x" +
                std::to_string(ops.shape.cols));
}

inline void check_noise(const ImageField& u, const Matrix& eps) {
    require(eps.rows() == u.data.rows() && eps.cols() == u.data.cols(), ErrorKind::DimensionMismatch,
            "noise field does not match the image field");
}

}  // namespace detail

/// One step of the forward chain with caller-supplied noise (pass zeros to get the mean).
inline ForwardSample forward_step_with_noise(const OperatorSet& ops, const NoiseSchedule& schedule,
                                             const ImageField& u_prev, int n, const Matrix& eps) {
    schedule.check_step(n);
    detail::check_field(ops, u_prev);
    detail::check_noise(u_prev, eps);
    const Matrix noise_op = matrix_power(ops, n - schedule.steps());
    Matrix next = std::sqrt(schedule.alpha(n)) * (ops.A * u_prev.data) +
                  std::sqrt(1.0 - schedule.alpha(n)) * (noise_op * eps);
    return {n, ImageField(u_prev.shape, std::move(next)), eps};
}

template <class Rng>
ForwardSample forward_step(const OperatorSet& ops, const NoiseSchedule& schedule, const ImageField& u_prev, int n,
                           Rng& rng) {
    detail::check_field(ops, u_prev);
    return forward_step_with_noise(ops, schedule, u_prev, n,
                                   standard_normal(u_prev.data.rows(), u_prev.data.cols(), rng));
}

/// Closed-form jump from u_0 to u_n given e_n. A^n and A^(n-N) may be supplied to avoid recomputation.
inline ForwardSample forward_jump_with_noise(const OperatorSet& ops, const NoiseSchedule& schedule,
                                             const ImageField& u0, int n, const Matrix& e_n,
                                             const Matrix* A_pow_n = nullptr,
                                             const Matrix* A_pow_n_minus_N = nullptr) {
    schedule.check_step(n);
    detail::check_field(ops, u0);
    detail::check_noise(u0, e_n);
    const double ab = schedule.alpha_bar(n);
    const Matrix signal_op = A_pow_n ? *A_pow_n : matrix_power(ops, n);
    const Matrix noise_op = A_pow_n_minus_N ? *A_pow_n_minus_N : matrix_power(ops, n - schedule.steps());
    Matrix u = std::sqrt(ab) * (signal_op * u0.data) + std::sqrt(1.0 - ab) * (noise_op * e_n);
    return {n, ImageField(u0.shape, std::move(u)), e_n};
}

template <class Rng>
ForwardSample forward_jump(const OperatorSet& ops, const NoiseSchedule& schedule, const ImageField& u0, int n,
                           Rng& rng) {
    detail::check_field(ops, u0);
    return forward_jump_with_noise(ops, schedule, u0, n, standard_normal(u0.data.rows(), u0.data.cols(), rng));
}

/// Gaussian parameters of q(u_n | u_{n-1}) and q(u_n | u_0).
struct ForwardKernel {
    Matrix mean_op_step;  // sqrt(a_n) A
    Matrix cov_step;      // (1 - a_n) B_n
    Matrix mean_op_jump;  // sqrt(abar_n) A^n
    Matrix cov_jump;      // (1 - abar_n) B_n
    Matrix B;             // A^(n-N) A^(n-N)^T
    Matrix noise_op;      // A^(n-N), so B = noise_op noise_op^T
};

inline Matrix noise_shape_B(const OperatorSet& ops, const NoiseSchedule& schedule, int n) {
    const Matrix M = matrix_power(ops, n - schedule.steps());
    return symmetrized(M * M.transpose());
}

inline ForwardKernel forward_kernel_params(const OperatorSet& ops, const NoiseSchedule& schedule, int n) {
    schedule.check_step(n);
    ForwardKernel k;
    k.noise_op = matrix_power(ops, n - schedule.steps());
    k.B = symmetrized(k.noise_op * k.noise_op.transpose());
    k.mean_op_step = std::sqrt(schedule.alpha(n)) * ops.A;
    k.cov_step = (1.0 - schedule.alpha(n)) * k.B;
    k.mean_op_jump = std::sqrt(schedule.alpha_bar(n)) * matrix_power(ops, n);
    k.cov_jump = (1.0 - schedule.alpha_bar(n)) * k.B;
    return k;
}

}  // namespace hdm
