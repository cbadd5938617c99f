#pragma once

// Ancestral sampling through the learned reverse chain:
//   u_{n-1} = C_n u_n + D_n e_hat(u_n, n) + L_n z_n,  Sigma_n = L_n L_n^T.

#include "hdm/error.hpp"
#include "hdm/forward_process.hpp"
#include "hdm/predictor.hpp"
#include "hdm/reverse_posterior.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace hdm {

struct SampleTrace {
    std::uint64_t seed = 0;
    std::vector<std::pair<int, ImageField>> snapshots;  // (n, u_n), n strictly decreasing
    ImageField u0;
};

struct SamplerOptions {
    int snapshot_stride = 0;    // 0 disables snapshots
    bool noisy_final = false;   // add L_1 z_1 = z_1 at n = 1 as well
};

/// One reverse transition given a noise estimate and a standard-normal draw z.
inline Matrix reverse_step(const StepMatrices& m, const Matrix& u_n, const Matrix& e_hat, const Matrix& z) {
    require(u_n.rows() == m.C.rows() && e_hat.rows() == u_n.rows() && z.rows() == u_n.rows(),
            ErrorKind::DimensionMismatch, "reverse step inputs do not match the step matrices");
    return m.C * u_n + m.D * e_hat + m.L * z;
}

template <NoisePredictor P, class Rng>
ImageField denoise_from(const OperatorSet& ops, const NoiseSchedule& schedule, const P& predictor,
                        const ImageField& u_start, int n_start, Rng& rng, const SamplerOptions& opts = {},
                        SampleTrace* trace = nullptr) {
    schedule.check_step(n_start);
    detail::check_field(ops, u_start);
    const int N = schedule.steps();
    ImageField u = u_start;
    PowerCursor cursor = cursor_at(ops, schedule, n_start);
    for (int n = n_start; n >= 1; --n) {
        if (n != cursor.n) cursor = cursor_step_down(std::move(cursor));
        const StepMatrices m = step_matrices_at(ops, schedule, cursor);
        const Matrix e_hat = predictor.predict(PredictorInput{u, n, N});
        Matrix z = (n > 1 || opts.noisy_final) ? standard_normal(u.data.rows(), u.data.cols(), rng)
                                               : Matrix::Zero(u.data.rows(), u.data.cols());
        u.data = reverse_step(m, u.data, e_hat, z);
        require(u.data.allFinite(), ErrorKind::NonFinite, "sample became non-finite at n=" + std::to_string(n));
        if (trace && opts.snapshot_stride > 0 && n > 1 && (n - 1) % opts.snapshot_stride == 0)
            trace->snapshots.emplace_back(n - 1, u);
    }
    return u;
}

template <NoisePredictor P>
SampleTrace sample(const OperatorSet& ops, const NoiseSchedule& schedule, const P& predictor, std::uint64_t seed,
                   int channels = 1, const SamplerOptions& opts = {}) {
    std::mt19937_64 rng(seed);
    SampleTrace trace;
    trace.seed = seed;
    ImageField u_N(ops.shape, standard_normal(ops.size(), channels, rng));
    if (opts.snapshot_stride > 0) trace.snapshots.emplace_back(schedule.steps(), u_N);
    trace.u0 = denoise_from(ops, schedule, predictor, u_N, schedule.steps(), rng, opts, &trace);
    return trace;
}

}  // namespace hdm
