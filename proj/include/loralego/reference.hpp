// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "loralego/matrix.hpp"

namespace loralego::ref {

// Single-threaded reference kernels. Tests check the parallel kernels
// against these, and tools/bench_kernels times both. Kept deliberately
// naive; do not optimize.

/// Entry-by-entry triple-loop product.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Index of the centroid nearest to each point (squared Euclidean,
/// ties to the lowest index).
std::vector<std::size_t> assign_nearest(const std::vector<std::vector<double>>& points,
                                        const std::vector<std::vector<double>>& centroids);

}  // namespace loralego::ref
