#pragma once

#include "hdm/error.hpp"
#include "hdm/forward_process.hpp"
#include "hdm/linalg.hpp"

#include <array>
#include <bit>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

namespace hdm {

struct PredictorInput {
    const ImageField& u_n;
    int n;
    int N;

    double n_embed() const { return double(n) / double(N); }
};

/// Anything that maps (u_n, n) to a noise estimate with the layout of u_n.data.
template <class P>
concept NoisePredictor = requires(const P& p, const PredictorInput& in) {
    { p.predict(in) } -> std::convertible_to<Matrix>;
};

/// e_hat = Wu u_n + wt * (n/N) + b, applied to each channel with shared parameters.
struct LinearPredictor {
    Matrix Wu;
    Vector wt;
    Vector b;

    LinearPredictor() = default;
    explicit LinearPredictor(Eigen::Index pixels)
        : Wu(Matrix::Zero(pixels, pixels)), wt(Vector::Zero(pixels)), b(Vector::Zero(pixels)) {}

    Eigen::Index pixels() const { return b.size(); }
    Eigen::Index parameter_count() const { return Wu.size() + wt.size() + b.size(); }

    Matrix predict(const PredictorInput& in) const {
        require(in.u_n.data.rows() == pixels(), ErrorKind::DimensionMismatch,
                "predictor expects " + std::to_string(pixels()) + " pixels");
        Matrix out = Wu * in.u_n.data;
        out.colwise() += wt * in.n_embed() + b;
        return out;
    }
};

struct LinearGradient {
    Matrix dWu;
    Vector dwt;
    Vector db;
};

/// Chain rule through the linear model. `residual_weighted` is dLoss/de_hat = -2 W (e - e_hat),
/// one column per channel.
inline LinearGradient gradient(const LinearPredictor& p, const PredictorInput& in, const Matrix& residual_weighted) {
    require(residual_weighted.rows() == p.pixels() && residual_weighted.cols() == in.u_n.data.cols(),
            ErrorKind::DimensionMismatch, "weighted residual does not match the predictor output");
    LinearGradient g;
    g.dWu = residual_weighted * in.u_n.data.transpose();
    g.db = residual_weighted.rowwise().sum();
    g.dwt = g.db * in.n_embed();
    return g;
}

inline void sgd_update(LinearPredictor& p, const LinearGradient& g, double eta) {
    p.Wu -= eta * g.dWu;
    p.wt -= eta * g.dwt;
    p.b -= eta * g.db;
}

inline bool all_finite(const LinearPredictor& p) { return p.Wu.allFinite() && p.wt.allFinite() && p.b.allFinite(); }

/// Test-only predictor that returns the noise recorded when u_n was drawn.
struct OraclePredictor {
    Matrix recorded;

    Matrix predict(const PredictorInput& in) const {
        require(recorded.rows() == in.u_n.data.rows() && recorded.cols() == in.u_n.data.cols(),
                ErrorKind::DimensionMismatch, "recorded noise does not match input");
        return recorded;
    }
};

/// Always predicts zero noise.
struct ZeroPredictor {
    Matrix predict(const PredictorInput& in) const { return Matrix::Zero(in.u_n.data.rows(), in.u_n.data.cols()); }
};

// --- checkpoint ---------------------------------------------------------------
//
// Layout (little-endian): "HDMPR1" | u64 rows | u64 cols | u64 channels |
// Wu (row-major) | wt | b, all f64.

inline constexpr std::array<char, 6> kPredictorMagic = {'H', 'D', 'M', 'P', 'R', '1'};

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    require(bool(in), ErrorKind::Io, "truncated file");
    return v;
}

inline double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    require(bool(in), ErrorKind::Io, "truncated file");
    return v;
}

inline void write_row_major(std::ostream& out, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

inline Matrix read_row_major(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_f64(in);
    return m;
}

}  // namespace detail

inline void save_predictor(const std::string& path, const LinearPredictor& p, GridShape shape, int channels) {
    require(p.pixels() == shape.size(), ErrorKind::DimensionMismatch, "predictor does not match grid");
    std::ofstream out(path, std::ios::binary);
    require(bool(out), ErrorKind::Io, "cannot open " + path + " for writing");
    out.write(kPredictorMagic.data(), kPredictorMagic.size());
    detail::write_u64(out, std::uint64_t(shape.rows));
    detail::write_u64(out, std::uint64_t(shape.cols));
    detail::write_u64(out, std::uint64_t(channels));
    detail::write_row_major(out, p.Wu);
    for (double v : p.wt) detail::write_f64(out, v);
    for (double v : p.b) detail::write_f64(out, v);
    require(bool(out), ErrorKind::Io, "failed writing " + path);
}

/// Loads a checkpoint and rejects it unless it was saved for exactly (shape, channels).
inline LinearPredictor load_predictor(const std::string& path, GridShape shape, int channels) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), ErrorKind::Io, "cannot open " + path);
    std::array<char, 6> magic{};
    in.read(magic.data(), magic.size());
    require(bool(in) && magic == kPredictorMagic, ErrorKind::Io, path + " is not an HDMPR1 checkpoint");
    const auto rows = detail::read_u64(in);
    const auto cols = detail::read_u64(in);
    const auto ch = detail::read_u64(in);
    require(rows == std::uint64_t(shape.rows) && cols == std::uint64_t(shape.cols) && ch == std::uint64_t(channels),
            ErrorKind::DimensionMismatch,
            "checkpoint is for " + std::to_string(rows) + "x" + std::to_string(cols) + "x" + std::to_string(ch));
    const Eigen::Index P = shape.size();
    LinearPredictor p;
    p.Wu = detail::read_row_major(in, P, P);
    p.wt.resize(P);
    p.b.resize(P);
    for (Eigen::Index i = 0; i < P; ++i) p.wt(i) = detail::read_f64(in);
    for (Eigen::Index i = 0; i < P; ++i) p.b(i) = detail::read_f64(in);
    return p;
}

}  // namespace hdm
