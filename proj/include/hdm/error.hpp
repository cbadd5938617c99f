#pragma once

#include <stdexcept>
#include <string>

namespace hdm {

enum class ErrorKind {
    InvalidParams,
    DimensionMismatch,
    SingularOperator,
    NotPositiveDefinite,
    NonFinite,
    CursorUnderflow,
    DivergenceDetected,
    DegenerateCovariance,
    InvalidDistribution,
    Io,
};

inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularOperator: return "SingularOperator";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::CursorUnderflow: return "CursorUnderflow";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) fail(kind, what);
}

}  // namespace hdm
