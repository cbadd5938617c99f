#pragma once

// Operator cache file (little-endian):
//   "HDMOP1" | u64 rows | u64 cols | f64 theta | f64 K | u64 boundary | S | T | A
// with each matrix stored row-major as f64.

#include "hdm/error.hpp"
#include "hdm/heat_operator.hpp"
#include "hdm/predictor.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace hdm {

inline constexpr std::array<char, 6> kOperatorMagic = {'H', 'D', 'M', 'O', 'P', '1'};

inline void save_operator_cache(const std::string& path, const OperatorSet& ops) {
    require(!ops.ablation, ErrorKind::InvalidParams, "ablation operators are not cached");
    std::ofstream out(path, std::ios::binary);
    require(bool(out), ErrorKind::Io, "cannot open " + path + " for writing");
    out.write(kOperatorMagic.data(), kOperatorMagic.size());
    detail::write_u64(out, std::uint64_t(ops.shape.rows));
    detail::write_u64(out, std::uint64_t(ops.shape.cols));
    detail::write_f64(out, ops.params.theta);
    detail::write_f64(out, ops.params.K);
    detail::write_u64(out, std::uint64_t(ops.params.boundary));
    detail::write_row_major(out, ops.S);
    detail::write_row_major(out, ops.T);
    detail::write_row_major(out, ops.A);
    require(bool(out), ErrorKind::Io, "failed writing " + path);
}

/// Returns the cached operators only when the header matches (shape, theta, K, boundary) exactly.
inline std::optional<OperatorSet> load_operator_cache(const std::string& path, const GridShape& shape,
                                                      const SchemeParams& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::array<char, 6> magic{};
    in.read(magic.data(), magic.size());
    require(bool(in) && magic == kOperatorMagic, ErrorKind::Io, path + " is not an HDMOP1 operator cache");
    const auto rows = detail::read_u64(in);
    const auto cols = detail::read_u64(in);
    const double theta = detail::read_f64(in);
    const double K = detail::read_f64(in);
    const auto boundary = detail::read_u64(in);
    if (rows != std::uint64_t(shape.rows) || cols != std::uint64_t(shape.cols) || theta != params.theta ||
        K != params.K || boundary != std::uint64_t(params.boundary))
        return std::nullopt;

    OperatorSet ops;
    ops.shape = shape;
    ops.params = params;
    const Eigen::Index P = shape.size();
    ops.S = detail::read_row_major(in, P, P);
    ops.T = detail::read_row_major(in, P, P);
    ops.A = detail::read_row_major(in, P, P);
    ops.luS.compute(ops.S);
    ops.condition_S = detail::condition_estimate(ops.luS);
    ops.luA.compute(ops.A);
    ops.condition_A = detail::condition_estimate(ops.luA);
    require(ops.condition_A < kSingularConditionLimit, ErrorKind::SingularOperator, "cached A is singular");
    return ops;
}

/// File name that encodes the parameters bit-exactly (hex floats).
inline std::string operator_cache_name(const GridShape& shape, const SchemeParams& params) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "hdmop_%dx%d_theta%a_K%a_%s.bin", shape.rows, shape.cols, params.theta, params.K,
                  to_string(params.boundary));
    return buf;
}

/// Directory named by HDM_CACHE_DIR, if set.
inline std::optional<std::filesystem::path> operator_cache_dir() {
    const char* dir = std::getenv("HDM_CACHE_DIR");
    if (dir == nullptr || *dir == '\0') return std::nullopt;
    return std::filesystem::path(dir);
}

/// Loads from HDM_CACHE_DIR when possible, otherwise builds and stores there.
inline OperatorSet build_or_load_operators(const GridShape& shape, const SchemeParams& params, bool* loaded = nullptr) {
    if (loaded) *loaded = false;
    const auto dir = operator_cache_dir();
    if (!dir) return build_operators(shape, params);
    validate(shape);
    validate(params);
    const auto path = *dir / operator_cache_name(shape, params);
    if (auto cached = load_operator_cache(path.string(), shape, params)) {
        if (loaded) *loaded = true;
        return std::move(*cached);
    }
    OperatorSet ops = build_operators(shape, params);
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    save_operator_cache(path.string(), ops);
    return ops;
}

}  // namespace hdm
