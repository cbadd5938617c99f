#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace hdm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// ||M - M^T||_F / ||M||_F, zero for the zero matrix.
inline double relative_asymmetry(const Matrix& m) {
    const double norm = m.norm();
    return norm == 0.0 ? 0.0 : (m - m.transpose()).norm() / norm;
}

inline double relative_difference(const Matrix& a, const Matrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Fills an m x n matrix with i.i.d. standard normal draws, column by column.
template <class Rng>
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = normal(rng);
    return out;
}

}  // namespace hdm
