#pragma once

#include "hdm/error.hpp"
#include "hdm/heat_operator.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace hdm {

enum class Ablation { None, RandomMatrix };

inline Ablation parse_ablation(const std::string& s) {
    if (s == "none" || s.empty()) return Ablation::None;
    if (s == "random_matrix") return Ablation::RandomMatrix;
    fail(ErrorKind::InvalidParams, "unknown ablation mode '" + s + "' (expected none or random_matrix)");
}

inline Boundary parse_boundary(const std::string& s) {
    if (s == "adiabatic") return Boundary::Adiabatic;
    if (s == "fixed_zero") return Boundary::FixedZero;
    fail(ErrorKind::InvalidParams, "unknown boundary '" + s + "' (expected adiabatic or fixed_zero)");
}

/// Settings shared by every subcommand, after flags and the config file are merged.
struct RunConfig {
    GridShape shape{8, 8};
    double theta = 0.5;
    std::optional<double> K;
    std::optional<double> gamma;
    int N = 20;
    std::uint64_t seed = 0;
    Boundary boundary = Boundary::Adiabatic;
    Ablation ablation = Ablation::None;

    /// Validates and derives K from gamma (d = 2) when gamma was given.
    SchemeParams scheme() const {
        require(!(K && gamma), ErrorKind::InvalidParams, "K and gamma are mutually exclusive");
        SchemeParams p;
        p.theta = theta;
        p.boundary = boundary;
        p.gamma = gamma;
        p.K = gamma ? select_K(*gamma, 2) : K.value_or(0.0625);
        validate(shape);
        validate(p);
        require(N >= 2, ErrorKind::InvalidParams, "N must be >= 2");
        return p;
    }
};

inline OperatorSet make_operators(const RunConfig& cfg, const SchemeParams& p) {
    if (cfg.ablation == Ablation::RandomMatrix) return build_random_operators(cfg.shape, p, cfg.seed);
    return build_operators(cfg.shape, p);
}

}  // namespace hdm
