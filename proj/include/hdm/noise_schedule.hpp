#pragma once

#include "hdm/error.hpp"
#include "hdm/heat_operator.hpp"
#include "hdm/linalg.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace hdm {

/// beta, alpha are indexed 1..N (slot 0 unused); alpha_bar is indexed 0..N with alpha_bar[0] = 1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    explicit NoiseSchedule(std::vector<double> betas) {
        require(betas.size() >= 1, ErrorKind::InvalidParams, "schedule needs at least one step");
        const std::size_t n = betas.size();
        beta_.assign(n + 1, 0.0);
        alpha_.assign(n + 1, 1.0);
        alpha_bar_.assign(n + 1, 1.0);
        for (std::size_t k = 1; k <= n; ++k) {
            const double b = betas[k - 1];
            require(b > 0.0 && b < 1.0, ErrorKind::InvalidParams, "beta must lie in (0, 1)");
            beta_[k] = b;
            alpha_[k] = 1.0 - b;
            alpha_bar_[k] = alpha_bar_[k - 1] * alpha_[k];
        }
    }

    int steps() const { return int(beta_.size()) - 1; }
    double beta(int n) const { return beta_.at(n); }
    double alpha(int n) const { return alpha_.at(n); }
    double alpha_bar(int n) const { return alpha_bar_.at(n); }

    /// Classical posterior variance (1 - alpha_bar[n-1]) beta[n] / (1 - alpha_bar[n]).
    double beta_tilde(int n) const { return (1.0 - alpha_bar(n - 1)) * beta(n) / (1.0 - alpha_bar(n)); }

    void check_step(int n) const {
        require(n >= 1 && n <= steps(), ErrorKind::InvalidParams,
                "step " + std::to_string(n) + " outside 1.." + std::to_string(steps()));
    }

private:
    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

/// Linear beta from 1e-4 to 0.02 over N steps.
inline NoiseSchedule linear_schedule(int N, double beta_start = 1e-4, double beta_end = 0.02) {
    require(N >= 2, ErrorKind::InvalidParams, "N must be >= 2");
    std::vector<double> betas(N);
    for (int n = 1; n <= N; ++n) betas[n - 1] = beta_start + double(n - 1) / double(N - 1) * (beta_end - beta_start);
    return NoiseSchedule(std::move(betas));
}

inline void write_schedule_csv(std::ostream& out, const NoiseSchedule& s) {
    out << "n,beta,alpha,alpha_bar\n";
    out.precision(17);
    for (int n = 1; n <= s.steps(); ++n) out << n << ',' << s.beta(n) << ',' << s.alpha(n) << ',' << s.alpha_bar(n) << '\n';
}

// --- powers of A ----------------------------------------------------------

namespace detail {

inline Matrix binary_power(Matrix base, long long e) {
    Matrix result = Matrix::Identity(base.rows(), base.cols());
    bool first = true;
    while (e > 0) {
        if (e & 1) {
            result = first ? base : Matrix(result * base);
            first = false;
        }
        e >>= 1;
        if (e > 0) base = base * base;
    }
    return result;
}

}  // namespace detail

inline Matrix inverse_propagator(const OperatorSet& ops) {
    return ops.luA.solve(Matrix::Identity(ops.size(), ops.size()));
}

/// A^e by binary exponentiation; negative exponents go through A^-1 from the LU of A.
inline Matrix matrix_power(const OperatorSet& ops, long long e) {
    if (e == 0) return Matrix::Identity(ops.size(), ops.size());
    Matrix result = e > 0 ? detail::binary_power(ops.A, e) : detail::binary_power(inverse_propagator(ops), -e);
    require(all_finite(result), ErrorKind::NonFinite, "A^" + std::to_string(e) + " overflowed");
    return result;
}

/// Walks the step index downwards holding A^n, A^(n-N) and A^(N-n).
struct PowerCursor {
    const OperatorSet* ops = nullptr;
    int N = 0;
    int n = 0;
    Matrix A_pow_n;
    Matrix A_pow_n_minus_N;
    Matrix A_pow_N_minus_n;
    int steps_since_sync = 0;
};

inline constexpr int kCursorResyncInterval = 64;

inline PowerCursor cursor_at(const OperatorSet& ops, const NoiseSchedule& schedule, int n) {
    schedule.check_step(n);
    PowerCursor c;
    c.ops = &ops;
    c.N = schedule.steps();
    c.n = n;
    c.A_pow_n = matrix_power(ops, n);
    c.A_pow_n_minus_N = matrix_power(ops, n - c.N);
    c.A_pow_N_minus_n = matrix_power(ops, c.N - n);
    return c;
}

inline PowerCursor cursor_step_down(PowerCursor c) {
    require(c.ops != nullptr, ErrorKind::InvalidParams, "cursor is not attached to an operator set");
    if (c.n <= 1) fail(ErrorKind::CursorUnderflow, "cannot step below n = 1");
    const OperatorSet& ops = *c.ops;
    --c.n;
    if (++c.steps_since_sync >= kCursorResyncInterval) {
        c.A_pow_n = matrix_power(ops, c.n);
        c.A_pow_n_minus_N = matrix_power(ops, c.n - c.N);
        c.A_pow_N_minus_n = matrix_power(ops, c.N - c.n);
        c.steps_since_sync = 0;
        return c;
    }
    // powers of A commute, so a left solve with A is the same as right-multiplying by A^-1
    c.A_pow_n = ops.luA.solve(c.A_pow_n);
    c.A_pow_n_minus_N = ops.luA.solve(c.A_pow_n_minus_N);
    c.A_pow_N_minus_n = ops.A * c.A_pow_N_minus_n;
    require(all_finite(c.A_pow_n_minus_N), ErrorKind::NonFinite, "A^(n-N) overflowed while stepping down");
    return c;
}

}  // namespace hdm
