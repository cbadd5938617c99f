#pragma once

// Frechet distance between Gaussian fits of two feature sets, and the inception score
// of a table of class probabilities. Feature extraction is the caller's business.

#include "hdm/error.hpp"
#include "hdm/linalg.hpp"

#include <cmath>
#include <string>

namespace hdm {

inline constexpr double kSqrtEigenClamp = 1e-8;
inline constexpr double kSimplexTolerance = 1e-9;

/// m samples of dimension d, one per row.
struct FeatureSet {
    Matrix rows;

    Eigen::Index m() const { return rows.rows(); }
    Eigen::Index d() const { return rows.cols(); }
};

struct GaussianMoments {
    Vector mean;
    Matrix cov;
};

inline GaussianMoments moments(const FeatureSet& x) {
    require(x.m() >= 2, ErrorKind::InvalidParams, "need at least 2 samples for a covariance");
    require(x.rows.allFinite(), ErrorKind::InvalidParams, "features must be finite");
    GaussianMoments g;
    g.mean = x.rows.colwise().mean().transpose();
    const Matrix centered = x.rows.rowwise() - g.mean.transpose();
    g.cov = symmetrized(centered.transpose() * centered / double(x.m() - 1));
    return g;
}

namespace detail {

/// Symmetric PSD square root; eigenvalues within -kSqrtEigenClamp (relative) are clamped to 0.
inline Matrix psd_sqrt(const Matrix& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
    const Vector& ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -kSqrtEigenClamp * scale)
        fail(ErrorKind::DegenerateCovariance,
             std::string(what) + " has eigenvalue " + std::to_string(ev.minCoeff()) + " below the clamp");
    const Vector root = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_x - mu_y||^2 + Tr(S_x + S_y - 2 (S_x S_y)^(1/2)), with Tr (S_x S_y)^(1/2) taken from the
/// similar symmetric matrix S_x^(1/2) S_y S_x^(1/2).
inline double fid_from_moments(const GaussianMoments& x, const GaussianMoments& y) {
    require(x.mean.size() == y.mean.size() && x.cov.rows() == y.cov.rows(), ErrorKind::DimensionMismatch,
            "feature dimensions differ");
    const Matrix root_x = detail::psd_sqrt(x.cov, "covariance of X");
    const Matrix middle = root_x * y.cov * root_x;
    const double trace_sqrt = detail::psd_sqrt(middle, "S_x^1/2 S_y S_x^1/2").trace();
    const double value = (x.mean - y.mean).squaredNorm() + x.cov.trace() + y.cov.trace() - 2.0 * trace_sqrt;
    return std::max(value, 0.0);
}

inline double fid(const FeatureSet& x, const FeatureSet& y) {
    require(x.d() == y.d(), ErrorKind::DimensionMismatch,
            "feature dimension " + std::to_string(x.d()) + " vs " + std::to_string(y.d()));
    return fid_from_moments(moments(x), moments(y));
}

/// m rows of class probabilities over c classes.
struct ClassProbTable {
    Matrix rows;
};

inline void validate(const ClassProbTable& p) {
    require(p.rows.rows() >= 1 && p.rows.cols() >= 1, ErrorKind::InvalidDistribution, "empty probability table");
    for (Eigen::Index i = 0; i < p.rows.rows(); ++i) {
        const auto row = p.rows.row(i);
        require(row.allFinite() && row.minCoeff() >= 0.0, ErrorKind::InvalidDistribution,
                "row " + std::to_string(i) + " has negative or non-finite entries");
        require(std::abs(row.sum() - 1.0) <= kSimplexTolerance, ErrorKind::InvalidDistribution,
                "row " + std::to_string(i) + " sums to " + std::to_string(row.sum()));
    }
}

/// exp(E_x KL(p(y|x) || p(y))), p(y) the row mean.
inline double inception_score(const ClassProbTable& p) {
    validate(p);
    const Vector marginal = p.rows.colwise().mean().transpose();
    double kl_sum = 0.0;
    for (Eigen::Index i = 0; i < p.rows.rows(); ++i)
        for (Eigen::Index c = 0; c < p.rows.cols(); ++c) {
            const double q = p.rows(i, c);
            if (q > 0.0) kl_sum += q * (std::log(q) - std::log(marginal(c)));
        }
    return std::exp(kl_sum / double(p.rows.rows()));
}

}  // namespace hdm
