#pragma once

// Exact reverse posterior q(u_{n-1} | u_n, u_0) = N(mu_n, Sigma_n) of the heat forward process
// and the reparameterized mean mu_n = C_n u_n + D_n e_n.
//
//   Sigma_n = [ a_n/(1-a_n) A^T B_n^-1 A + 1/(1-abar_{n-1}) B_{n-1}^-1 ]^-1
//   B_n^-1  = (A^(N-n))^T A^(N-n)
//
// n = 1 is the delta step: Sigma_1 = I, C_1 = A^-1/sqrt(a_1), D_1 = -sqrt((1-a_1)/a_1) A^-N.

#include "hdm/error.hpp"
#include "hdm/forward_process.hpp"
#include "hdm/heat_operator.hpp"
#include "hdm/linalg.hpp"
#include "hdm/noise_schedule.hpp"

#include <cmath>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

namespace hdm {

/// Accepted ||M - M^T|| / ||M|| before a posterior matrix is rejected.
inline constexpr double kAsymmetryTolerance = 1e-8;

struct StepMatrices {
    int n = 0;
    Matrix Sigma;
    Matrix L;  // lower Cholesky factor of Sigma
    Matrix C;
    Matrix D;
    Matrix W;  // D^T Sigma^-1 D
};

struct PosteriorMeanOperators {
    Matrix on_u_n;
    Matrix on_u0;
};

namespace detail {

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline Eigen::LLT<Matrix> cholesky_or_throw(const Matrix& m, const std::string& what) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
        fail(ErrorKind::NotPositiveDefinite,
             what + " is not positive definite (min eigenvalue " + std::to_string(min_eigenvalue(m)) + ")");
    return llt;
}

inline Matrix checked_symmetric(const Matrix& m, const std::string& what) {
    require(all_finite(m), ErrorKind::NonFinite, what + " has non-finite entries");
    const double asym = relative_asymmetry(m);
    require(asym <= kAsymmetryTolerance, ErrorKind::NotPositiveDefinite,
            what + " asymmetry " + std::to_string(asym) + " exceeds tolerance");
    return symmetrized(m);
}

/// Square-root form of the posterior at step n >= 2.
///
/// The precision a X^T X + b Y^T Y, with X = A^(N-n) A (so X^T X = A^T B_n^-1 A) and
/// Y = A^(N-n+1) (Y^T Y = B_{n-1}^-1), is factored through the QR decomposition of the
/// stacked matrix [sqrt(a) X; sqrt(b) Y] = [Q1; Q2] R. Then Sigma_n = R^-1 R^-T, and
/// Sigma_n X^T = R^-1 Q1^T / sqrt(a), Sigma_n Y^T = R^-1 Q2^T / sqrt(b), which avoids
/// inverting a Gram matrix whose condition number is the square of A^(N-n+1)'s.
struct PosteriorFactor {
    Matrix R;           // upper triangular
    Matrix R_inv;       // R^-1
    Matrix Q1t;         // Q1^T
    Matrix Q2t;         // Q2^T
    Matrix A_pow_N_minus_n;
    Matrix A_pow_N;
    double a = 0.0;     // alpha_n / (1 - alpha_n)
    double b = 0.0;     // 1 / (1 - alpha_bar_{n-1})

    Matrix sigma() const { return R_inv * R_inv.transpose(); }
};

inline PosteriorFactor posterior_factor(const OperatorSet& ops, const NoiseSchedule& s, const PowerCursor& c) {
    const int n = c.n;
    const Eigen::Index P = ops.size();
    PosteriorFactor f;
    f.a = s.alpha(n) / (1.0 - s.alpha(n));
    f.b = 1.0 / (1.0 - s.alpha_bar(n - 1));
    f.A_pow_N_minus_n = c.A_pow_N_minus_n;
    f.A_pow_N = c.A_pow_n * c.A_pow_N_minus_n;

    Matrix stacked(2 * P, P);
    stacked.topRows(P) = std::sqrt(f.a) * (c.A_pow_N_minus_n * ops.A);
    stacked.bottomRows(P) = std::sqrt(f.b) * (ops.A * c.A_pow_N_minus_n);
    require(all_finite(stacked), ErrorKind::NonFinite, "posterior precision factor overflowed at n=" + std::to_string(n));
    const Eigen::HouseholderQR<Matrix> qr(stacked);
    const Matrix R = qr.matrixQR().topRows(P).triangularView<Eigen::Upper>();
    const double diag_min = R.diagonal().cwiseAbs().minCoeff();
    if (!(diag_min > 0.0))
        fail(ErrorKind::NotPositiveDefinite, "posterior precision is singular at n=" + std::to_string(n));
    const Matrix Q = qr.householderQ() * Matrix::Identity(2 * P, P);
    f.Q1t = Q.topRows(P).transpose();
    f.Q2t = Q.bottomRows(P).transpose();
    f.R_inv = R.triangularView<Eigen::Upper>().solve(Matrix::Identity(P, P));
    f.R = R;
    return f;
}

/// Sigma_n, with the raw asymmetry checked before symmetrization.
inline Matrix sigma_from_factor(const PosteriorFactor& f, int n, double* raw_asymmetry = nullptr) {
    const Matrix sigma = f.sigma();
    if (raw_asymmetry) *raw_asymmetry = relative_asymmetry(sigma);
    return checked_symmetric(sigma, "Sigma_" + std::to_string(n));
}

/// Sigma_n A^T B_n^-1 = Sigma_n X^T A^(N-n).
inline Matrix sigma_AtBinv(const PosteriorFactor& f) {
    return f.R.triangularView<Eigen::Upper>().solve(f.Q1t * f.A_pow_N_minus_n) / std::sqrt(f.a);
}

/// Sigma_n B_{n-1}^-1 A^k = Sigma_n Y^T A^(N-n+1+k); the power is passed already combined.
inline Matrix sigma_Binvprev_times(const PosteriorFactor& f, const Matrix& combined_power) {
    return f.R.triangularView<Eigen::Upper>().solve(f.Q2t * combined_power) / std::sqrt(f.b);
}

}  // namespace detail

/// Builds every per-step matrix at the cursor's step.
inline StepMatrices step_matrices_at(const OperatorSet& ops, const NoiseSchedule& s, const PowerCursor& c) {
    const int n = c.n;
    const int N = s.steps();
    s.check_step(n);
    StepMatrices m;
    m.n = n;
    const Eigen::Index P = ops.size();
    if (n == 1) {
        const double a1 = s.alpha(1);
        m.Sigma = Matrix::Identity(P, P);
        m.L = Matrix::Identity(P, P);
        m.C = inverse_propagator(ops) / std::sqrt(a1);
        m.D = -std::sqrt((1.0 - a1) / a1) * matrix_power(ops, -N);
        m.W = symmetrized(m.D.transpose() * m.D);
        return m;
    }

    const auto f = detail::posterior_factor(ops, s, c);
    const double a = s.alpha(n);
    const double ab = s.alpha_bar(n);
    const double ab_prev = s.alpha_bar(n - 1);

    m.Sigma = detail::sigma_from_factor(f, n);
    const auto llt = detail::cholesky_or_throw(m.Sigma, "Sigma_" + std::to_string(n));
    m.L = llt.matrixL();

    // C_n = Sigma_n [ sqrt(a)/(1-a) A^T B_n^-1 + 1/((1-abar_{n-1}) sqrt(a)) B_{n-1}^-1 A^-1 ]
    m.C = (std::sqrt(a) / (1.0 - a)) * detail::sigma_AtBinv(f) +
          (1.0 / ((1.0 - ab_prev) * std::sqrt(a))) * detail::sigma_Binvprev_times(f, f.A_pow_N_minus_n);
    // D_n = -sqrt(1-abar_n)/((1-abar_{n-1}) sqrt(a)) Sigma_n B_{n-1}^-1 A^(n-N-1); Y A^(n-N-1) = I
    const double d_scale = -std::sqrt(1.0 - ab) / ((1.0 - ab_prev) * std::sqrt(a));
    m.D = d_scale * detail::sigma_Binvprev_times(f, Matrix::Identity(P, P));

    // W_n = D^T Sigma^-1 D with Sigma^-1 = R^T R
    const Matrix whitened = f.R.triangularView<Eigen::Upper>() * m.D;
    m.W = symmetrized(whitened.transpose() * whitened);
    require(all_finite(m.C) && all_finite(m.D) && all_finite(m.W), ErrorKind::NonFinite,
            "step matrices at n=" + std::to_string(n) + " overflowed");
    return m;
}

inline StepMatrices step_matrices(const OperatorSet& ops, const NoiseSchedule& s, int n) {
    return step_matrices_at(ops, s, cursor_at(ops, s, n));
}

inline Matrix posterior_sigma(const OperatorSet& ops, const NoiseSchedule& s, int n) {
    s.check_step(n);
    if (n == 1) return Matrix::Identity(ops.size(), ops.size());
    return detail::sigma_from_factor(detail::posterior_factor(ops, s, cursor_at(ops, s, n)), n);
}

/// Relative asymmetry of Sigma_n as computed, before symmetrization.
inline double posterior_sigma_raw_asymmetry(const OperatorSet& ops, const NoiseSchedule& s, int n) {
    require(n >= 2, ErrorKind::InvalidParams, "posterior covariance formula needs n >= 2");
    s.check_step(n);
    double asym = 0.0;
    detail::sigma_from_factor(detail::posterior_factor(ops, s, cursor_at(ops, s, n)), n, &asym);
    return asym;
}

/// mu_n = on_u_n * u_n + on_u0 * u_0.
inline PosteriorMeanOperators posterior_mean_operators(const OperatorSet& ops, const NoiseSchedule& s, int n) {
    require(n >= 2, ErrorKind::InvalidParams, "posterior mean needs n >= 2 (n = 1 is the delta step)");
    s.check_step(n);
    const auto f = detail::posterior_factor(ops, s, cursor_at(ops, s, n));
    const double a = s.alpha(n);
    const double ab_prev = s.alpha_bar(n - 1);
    PosteriorMeanOperators out;
    out.on_u_n = (std::sqrt(a) / (1.0 - a)) * detail::sigma_AtBinv(f);
    // B_{n-1}^-1 A^(n-1) = Y^T A^N
    out.on_u0 = (std::sqrt(ab_prev) / (1.0 - ab_prev)) * detail::sigma_Binvprev_times(f, f.A_pow_N);
    return out;
}

inline ImageField posterior_mean(const OperatorSet& ops, const NoiseSchedule& s, int n, const ImageField& u_n,
                                 const ImageField& u0) {
    detail::check_field(ops, u_n);
    detail::check_field(ops, u0);
    require(u_n.channels() == u0.channels(), ErrorKind::DimensionMismatch, "channel counts differ");
    const auto m = posterior_mean_operators(ops, s, n);
    return {u_n.shape, m.on_u_n * u_n.data + m.on_u0 * u0.data};
}

struct Coefficients {
    Matrix C;
    Matrix D;
};

inline Coefficients coefficients(const OperatorSet& ops, const NoiseSchedule& s, int n) {
    auto m = step_matrices(ops, s, n);
    return {std::move(m.C), std::move(m.D)};
}

inline Matrix loss_weight(const OperatorSet& ops, const NoiseSchedule& s, int n) { return step_matrices(ops, s, n).W; }

// --- independent oracle ---------------------------------------------------

struct BruteForcePosterior {
    Matrix mean_op_u_n;
    Matrix mean_op_u0;
    Matrix Sigma;
};

/// Conditions the joint Gaussian of (u_n, u_{n-1}) given u_0, built only from the forward
/// kernels, on u_n. The Schur complement is taken through the block Cholesky factor of the
/// joint covariance G G^T, obtained from the QR decomposition of G^T.
inline BruteForcePosterior brute_force_posterior(const OperatorSet& ops, const NoiseSchedule& s, int n) {
    require(n >= 2, ErrorKind::InvalidParams, "brute-force posterior needs n >= 2");
    require(ops.size() <= 9, ErrorKind::InvalidParams, "brute-force posterior is limited to grids of at most 9 pixels");
    s.check_step(n);
    const ForwardKernel prev = forward_kernel_params(ops, s, n - 1);
    const ForwardKernel step = forward_kernel_params(ops, s, n);
    const Eigen::Index P = ops.size();

    // u_{n-1} | u_0 ~ N(M1 u_0, L1 L1^T);  u_n | u_{n-1} ~ N(F u_{n-1}, Lq Lq^T)
    const Matrix& M1 = prev.mean_op_jump;
    const Matrix& F = step.mean_op_step;
    const Matrix L1 = std::sqrt(1.0 - s.alpha_bar(n - 1)) * prev.noise_op;
    const Matrix Lq = std::sqrt(1.0 - s.alpha(n)) * step.noise_op;

    Matrix G = Matrix::Zero(2 * P, 2 * P);
    G.topLeftCorner(P, P) = F * L1;
    G.topRightCorner(P, P) = Lq;
    G.bottomLeftCorner(P, P) = L1;
    const Eigen::HouseholderQR<Matrix> qr(G.transpose());
    const Matrix joint_factor = qr.matrixQR().triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    const Matrix L11 = joint_factor.topLeftCorner(P, P);
    const Matrix L21 = joint_factor.bottomLeftCorner(P, P);
    const Matrix L22 = joint_factor.bottomRightCorner(P, P);
    require(L11.diagonal().cwiseAbs().minCoeff() > 0.0, ErrorKind::SingularOperator,
            "marginal covariance of u_n is singular");

    BruteForcePosterior out;
    out.mean_op_u_n = L11.triangularView<Eigen::Lower>().solve<Eigen::OnTheRight>(L21);
    out.mean_op_u0 = M1 - out.mean_op_u_n * F * M1;
    out.Sigma = symmetrized(L22 * L22.transpose());
    return out;
}

// --- cache ------------------------------------------------------------------

/// LRU cache of StepMatrices keyed by n; safe for concurrent readers.
class StepCache {
public:
    StepCache(const OperatorSet& ops, const NoiseSchedule& schedule, std::size_t capacity = 8)
        : ops_(ops), schedule_(schedule), capacity_(capacity == 0 ? 1 : capacity) {}

    std::shared_ptr<const StepMatrices> get(int n) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = index_.find(n); it != index_.end()) {
                order_.splice(order_.begin(), order_, it->second);
                return it->second->second;
            }
        }
        auto built = std::make_shared<const StepMatrices>(step_matrices(ops_, schedule_, n));
        std::lock_guard lock(mutex_);
        if (auto it = index_.find(n); it != index_.end()) return it->second->second;
        order_.emplace_front(n, built);
        index_[n] = order_.begin();
        if (order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
        return built;
    }

    /// Inserts matrices computed elsewhere (e.g. from a walking cursor).
    void put(std::shared_ptr<const StepMatrices> m) {
        std::lock_guard lock(mutex_);
        if (auto it = index_.find(m->n); it != index_.end()) {
            order_.erase(it->second);
            index_.erase(it);
        }
        order_.emplace_front(m->n, std::move(m));
        index_[order_.front().first] = order_.begin();
        if (order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return order_.size();
    }
    std::size_t capacity() const { return capacity_; }
    const OperatorSet& ops() const { return ops_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    using Entry = std::pair<int, std::shared_ptr<const StepMatrices>>;
    const OperatorSet& ops_;
    const NoiseSchedule& schedule_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<Entry> order_;
    std::unordered_map<int, std::list<Entry>::iterator> index_;
};

}  // namespace hdm
