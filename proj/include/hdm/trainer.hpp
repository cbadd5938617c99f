#pragma once

// Training loop: draw n ~ U{1..N} and e_n ~ N(0, I), jump u_0 to u_n, and take an SGD
// step on the weighted residual (e_n - e_hat)^T W_n (e_n - e_hat), W_n = D_n^T Sigma_n^-1 D_n.

#include "hdm/error.hpp"
#include "hdm/forward_process.hpp"
#include "hdm/predictor.hpp"
#include "hdm/reverse_posterior.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace hdm {

inline constexpr double kDivergenceLimit = 1e12;
inline constexpr int kRunningMeanWindow = 100;

struct TrainConfig {
    int epochs = 1;
    int batch = 1;
    double eta = 1e-10;
    std::uint64_t seed = 0;
    int N = 20;
    std::string loss_log_path;
};

struct LossRecord {
    int step = 0;
    int epoch = 0;
    int n = 0;
    double loss = 0.0;
    double running_mean = 0.0;  // mean over the trailing kRunningMeanWindow steps
};

struct TrainResult {
    LinearPredictor predictor;
    std::vector<LossRecord> log;
};

/// Sum over channels of r^T W_n r with r = e_n - e_hat.
inline double weighted_loss(const Matrix& W, const Matrix& e_n, const Matrix& e_hat) {
    require(e_n.rows() == W.rows() && e_hat.rows() == W.rows() && e_n.cols() == e_hat.cols(),
            ErrorKind::DimensionMismatch, "residual does not match the loss weight");
    const Matrix r = e_n - e_hat;
    return (r.transpose() * W * r).trace();
}

inline double loss_term(const OperatorSet& ops, const NoiseSchedule& s, int n, const Matrix& e_n, const Matrix& e_hat) {
    return weighted_loss(step_matrices(ops, s, n).W, e_n, e_hat);
}

inline void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& log) {
    out << "step,n,loss,running_mean\n";
    out.precision(17);
    for (const auto& r : log) out << r.step << ',' << r.n << ',' << r.loss << ',' << r.running_mean << '\n';
}

inline TrainResult train(const std::vector<ImageField>& dataset, const TrainConfig& cfg, const OperatorSet& ops,
                         const NoiseSchedule& schedule, LinearPredictor predictor, StepCache& cache) {
    require(!dataset.empty(), ErrorKind::InvalidParams, "dataset is empty");
    require(cfg.epochs >= 1 && cfg.batch >= 1 && cfg.eta > 0.0, ErrorKind::InvalidParams,
            "epochs and batch must be >= 1 and eta > 0");
    require(cfg.N == schedule.steps(), ErrorKind::InvalidParams, "config N does not match the schedule");
    const int channels = dataset.front().channels();
    for (const auto& f : dataset)
        require(f.shape == ops.shape && f.channels() == channels, ErrorKind::DimensionMismatch,
                "dataset fields must share the operator grid and channel count");
    require(predictor.pixels() == ops.size(), ErrorKind::DimensionMismatch, "predictor does not match grid");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick_step(1, schedule.steps());
    const int N = schedule.steps();
    const int per_epoch = int((dataset.size() + cfg.batch - 1) / cfg.batch);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::deque<double> window;
    double window_sum = 0.0;
    int step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int k = 0; k < per_epoch; ++k) {
            const int n = pick_step(rng);
            const auto mats = cache.get(n);
            const auto cursor = cursor_at(ops, schedule, n);

            LinearGradient total{Matrix::Zero(ops.size(), ops.size()), Vector::Zero(ops.size()),
                                 Vector::Zero(ops.size())};
            double loss = 0.0;
            int used = 0;
            for (int b = 0; b < cfg.batch; ++b) {
                const std::size_t idx = order[(std::size_t(k) * cfg.batch + b) % order.size()];
                const ImageField& u0 = dataset[idx];
                const Matrix e_n = standard_normal(u0.data.rows(), u0.data.cols(), rng);
                const auto fwd =
                    forward_jump_with_noise(ops, schedule, u0, n, e_n, &cursor.A_pow_n, &cursor.A_pow_n_minus_N);
                const PredictorInput in{fwd.u_n, n, N};
                const Matrix e_hat = predictor.predict(in);
                const Matrix residual = e_n - e_hat;
                loss += (residual.transpose() * mats->W * residual).trace();
                const auto g = gradient(predictor, in, -2.0 * (mats->W * residual));
                total.dWu += g.dWu;
                total.dwt += g.dwt;
                total.db += g.db;
                ++used;
            }
            loss /= used;
            total.dWu /= used;
            total.dwt /= used;
            total.db /= used;

            if (!std::isfinite(loss) || loss > kDivergenceLimit)
                fail(ErrorKind::DivergenceDetected,
                     "loss " + std::to_string(loss) + " at step " + std::to_string(step + 1) + "; lower eta");
            sgd_update(predictor, total, cfg.eta);

            ++step;
            window.push_back(loss);
            window_sum += loss;
            if (int(window.size()) > kRunningMeanWindow) {
                window_sum -= window.front();
                window.pop_front();
            }
            result.log.push_back({step, epoch, n, loss, window_sum / double(window.size())});
        }
    }
    require(all_finite(predictor), ErrorKind::DivergenceDetected, "parameters became non-finite");
    result.predictor = std::move(predictor);

    if (!cfg.loss_log_path.empty()) {
        std::ofstream out(cfg.loss_log_path);
        require(bool(out), ErrorKind::Io, "cannot write " + cfg.loss_log_path);
        write_loss_csv(out, result.log);
    }
    return result;
}

}  // namespace hdm
