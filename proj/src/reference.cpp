// SPDX-License-Identifier: Apache-2.0
#include "loralego/reference.hpp"

#include "loralego/errors.hpp"

namespace loralego::ref {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("ref::matmul: inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += a(i, k) * b(k, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

std::vector<std::size_t> assign_nearest(const std::vector<std::vector<double>>& points,
                                        const std::vector<std::vector<double>>& centroids) {
    std::vector<std::size_t> assignment(points.size(), 0);
    for (std::size_t p = 0; p < points.size(); ++p) {
        double best = -1.0;
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < points[p].size(); ++j) {
                const double diff = points[p][j] - centroids[c][j];
                d2 += diff * diff;
            }
            if (best < 0.0 || d2 < best) {
                best = d2;
                best_c = c;
            }
        }
        assignment[p] = best_c;
    }
    return assignment;
}

}  // namespace loralego::ref
