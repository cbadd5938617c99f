#pragma once

#include "hdm/forward_process.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hdm {

/// Seeded single-channel Gaussian blobs in model space: background -1, peak +1.
inline std::vector<ImageField> gaussian_blobs(GridShape shape, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> row(0.25 * shape.rows, 0.75 * shape.rows);
    std::uniform_real_distribution<double> col(0.25 * shape.cols, 0.75 * shape.cols);
    std::uniform_real_distribution<double> width(0.12 * std::min(shape.rows, shape.cols),
                                                 0.3 * std::min(shape.rows, shape.cols));
    std::vector<ImageField> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) {
        const double ci = row(rng), cj = col(rng), s = width(rng);
        ImageField f = ImageField::zeros(shape, 1);
        for (int i = 0; i < shape.rows; ++i)
            for (int j = 0; j < shape.cols; ++j) {
                const double r2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
                f.at(0, i, j) = 2.0 * std::exp(-r2 / (2.0 * s * s)) - 1.0;
            }
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace hdm
