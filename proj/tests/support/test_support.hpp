#pragma once

#include "hdm/hdm.hpp"

#include <gtest/gtest.h>

#include <functional>

namespace hdm::test {

inline OperatorSet heat(int rows, int cols, double K, double theta = 0.5) {
    SchemeParams p;
    p.theta = theta;
    p.K = K;
    return build_operators({rows, cols}, p);
}

inline ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an hdm::Error";
    return ErrorKind::Io;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace hdm::test
