// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "loralego/rng.hpp"

namespace loralego {

struct KmeansConfig {
    std::size_t k = 1;
    std::size_t max_iters = 200;
    double tol = 1e-6;  // relative inertia change for convergence
    std::size_t n_init = 10;
    std::uint64_t seed = 0;
};

struct ClusterResult {
    std::vector<std::size_t> assignments;          // point index -> cluster id
    std::vector<std::vector<double>> centroids;    // k vectors
    double inertia = 0.0;                          // Σ ||s - μ_assigned||²
    std::size_t iterations_run = 0;

    std::vector<std::vector<std::size_t>> members() const;
};

/// k-means++ seeding: first centroid uniform, each next drawn with
/// probability proportional to the squared distance to the nearest chosen
/// centroid. Deterministic given the generator state.
std::vector<std::vector<double>> kmeans_pp_init(const std::vector<std::vector<double>>& points,
                                                std::size_t k, Rng& rng);

/// Lloyd iterations from the given centroids until the relative inertia
/// change drops below tol or max_iters is hit. Empty clusters are repaired
/// by donating the point farthest from its own centroid. When
/// inertia_history is given, the inertia after every iteration is appended.
ClusterResult lloyd(const std::vector<std::vector<double>>& points,
                    std::vector<std::vector<double>> centroids, std::size_t max_iters,
                    double tol, std::vector<double>* inertia_history = nullptr);

/// Best of cfg.n_init seeded restarts by inertia; restart j uses seed
/// cfg.seed + j, so the result is deterministic and schedule-independent.
ClusterResult kmeans(const std::vector<std::vector<double>>& points, const KmeansConfig& cfg);

/// Globally optimal clustering by exhausting all partitions into k
/// non-empty parts. Refuses instances beyond n = 10 points or k = 4.
ClusterResult brute_force_cluster(const std::vector<std::vector<double>>& points,
                                  std::size_t k);

}  // namespace loralego
