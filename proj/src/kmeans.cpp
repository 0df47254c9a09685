// SPDX-License-Identifier: Apache-2.0
#include "loralego/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "loralego/errors.hpp"

namespace loralego {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void check_points(const std::vector<std::vector<double>>& points) {
    if (points.empty()) {
        throw DomainError("clustering: empty point set");
    }
    const std::size_t dim = points.front().size();
    if (dim == 0) {
        throw DomainError("clustering: zero-dimensional points");
    }
    for (const auto& p : points) {
        if (p.size() != dim) {
            throw DimensionError("clustering: points have mixed dimensions");
        }
    }
}

/// Nearest-centroid pass; parallel over points, ties to the lowest id.
std::vector<std::size_t> assign_points(const std::vector<std::vector<double>>& points,
                                       const std::vector<std::vector<double>>& centroids) {
    std::vector<std::size_t> assignment(points.size(), 0);
#pragma omp parallel for schedule(static) if (points.size() * centroids.size() > 256)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(points.size()); ++p) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d2 = squared_distance(points[p], centroids[c]);
            if (d2 < best) {
                best = d2;
                best_c = c;
            }
        }
        assignment[p] = best_c;
    }
    return assignment;
}

/// Moves the point farthest from its own centroid into each empty cluster.
/// Donor clusters must keep at least one member.
void repair_empty_clusters(const std::vector<std::vector<double>>& points,
                           const std::vector<std::vector<double>>& centroids,
                           std::vector<std::size_t>& assignment, std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    for (const std::size_t a : assignment) {
        ++counts[a];
    }
    for (std::size_t empty = 0; empty < k; ++empty) {
        if (counts[empty] != 0) {
            continue;
        }
        double worst = -1.0;
        std::size_t donor_point = points.size();
        for (std::size_t p = 0; p < points.size(); ++p) {
            if (counts[assignment[p]] < 2) {
                continue;
            }
            const double d2 = squared_distance(points[p], centroids[assignment[p]]);
            if (d2 > worst) {
                worst = d2;
                donor_point = p;
            }
        }
        if (donor_point == points.size()) {
            throw DomainError("clustering: cannot repair empty cluster (k > point count?)");
        }
        --counts[assignment[donor_point]];
        assignment[donor_point] = empty;
        ++counts[empty];
    }
}

std::vector<std::vector<double>> centroids_from_assignment(
    const std::vector<std::vector<double>>& points, const std::vector<std::size_t>& assignment,
    std::size_t k) {
    const std::size_t dim = points.front().size();
    std::vector<std::vector<double>> centroids(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t p = 0; p < points.size(); ++p) {
        const std::size_t c = assignment[p];
        ++counts[c];
        for (std::size_t j = 0; j < dim; ++j) {
            centroids[c][j] += points[p][j];
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            continue;
        }
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (double& v : centroids[c]) {
            v *= inv;
        }
    }
    return centroids;
}

double total_inertia(const std::vector<std::vector<double>>& points,
                     const std::vector<std::size_t>& assignment,
                     const std::vector<std::vector<double>>& centroids) {
    double acc = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
        acc += squared_distance(points[p], centroids[assignment[p]]);
    }
    return acc;
}

}  // namespace

std::vector<std::vector<std::size_t>> ClusterResult::members() const {
    std::vector<std::vector<std::size_t>> out(centroids.size());
    for (std::size_t p = 0; p < assignments.size(); ++p) {
        out[assignments[p]].push_back(p);
    }
    return out;
}

std::vector<std::vector<double>> kmeans_pp_init(const std::vector<std::vector<double>>& points,
                                                std::size_t k, Rng& rng) {
    check_points(points);
    if (k == 0 || k > points.size()) {
        throw DomainError("kmeans++: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(points.size()) + "]");
    }
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    centroids.push_back(points[rng.uniform_below(points.size())]);

    std::vector<double> dist2(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
        dist2[p] = squared_distance(points[p], centroids.front());
    }
    while (centroids.size() < k) {
        double total = 0.0;
        for (const double d : dist2) {
            total += d;
        }
        std::size_t chosen;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            chosen = points.size() - 1;
            for (std::size_t p = 0; p < points.size(); ++p) {
                cum += dist2[p];
                if (cum > target) {
                    chosen = p;
                    break;
                }
            }
        } else {
            // All points coincide with a chosen centroid; any pick is as good.
            chosen = rng.uniform_below(points.size());
        }
        centroids.push_back(points[chosen]);
        for (std::size_t p = 0; p < points.size(); ++p) {
            dist2[p] = std::min(dist2[p], squared_distance(points[p], centroids.back()));
        }
    }
    return centroids;
}

ClusterResult lloyd(const std::vector<std::vector<double>>& points,
                    std::vector<std::vector<double>> centroids, std::size_t max_iters,
                    double tol, std::vector<double>* inertia_history) {
    check_points(points);
    const std::size_t k = centroids.size();
    ClusterResult result;
    double prev_inertia = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> assignment;
    std::size_t iter = 0;
    for (; iter < max_iters; ++iter) {
        assignment = assign_points(points, centroids);
        repair_empty_clusters(points, centroids, assignment, k);
        centroids = centroids_from_assignment(points, assignment, k);
        const double inertia = total_inertia(points, assignment, centroids);
        if (inertia_history) {
            inertia_history->push_back(inertia);
        }
        if (inertia > prev_inertia * (1.0 + 1e-9) + 1e-12) {
            throw std::logic_error("kmeans: inertia increased within a Lloyd run");
        }
        const bool converged =
            std::isfinite(prev_inertia) &&
            (prev_inertia - inertia) <= tol * std::max(prev_inertia, 1e-300);
        prev_inertia = inertia;
        if (converged) {
            ++iter;
            break;
        }
    }
    result.assignments = std::move(assignment);
    result.centroids = std::move(centroids);
    result.inertia = prev_inertia;
    result.iterations_run = iter;
    return result;
}

ClusterResult kmeans(const std::vector<std::vector<double>>& points, const KmeansConfig& cfg) {
    check_points(points);
    if (cfg.k == 0 || cfg.k > points.size()) {
        throw DomainError("kmeans: k = " + std::to_string(cfg.k) + " outside [1, " +
                          std::to_string(points.size()) + "]");
    }
    if (cfg.max_iters < 1) {
        throw DomainError("kmeans: max_iters must be >= 1");
    }
    if (!(cfg.tol > 0.0)) {
        throw DomainError("kmeans: tol must be positive");
    }
    if (cfg.n_init < 1) {
        throw DomainError("kmeans: n_init must be >= 1");
    }

    ClusterResult best;
    bool have_best = false;
    for (std::size_t restart = 0; restart < cfg.n_init; ++restart) {
        Rng rng(cfg.seed + restart);
        ClusterResult candidate =
            lloyd(points, kmeans_pp_init(points, cfg.k, rng), cfg.max_iters, cfg.tol);
        if (!have_best || candidate.inertia < best.inertia) {
            best = std::move(candidate);
            have_best = true;
        }
    }
    return best;
}

namespace {

void enumerate_partitions(const std::vector<std::vector<double>>& points, std::size_t k,
                          std::vector<std::size_t>& labels, std::size_t next,
                          std::size_t used, std::size_t& evaluated, double& best_inertia,
                          std::vector<std::size_t>& best_labels) {
    const std::size_t n = points.size();
    if (next == n) {
        if (used != k) {
            return;
        }
        ++evaluated;
        const auto centroids = centroids_from_assignment(points, labels, k);
        const double inertia = total_inertia(points, labels, centroids);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_labels = labels;
        }
        return;
    }
    // Restricted growth strings: label at most one new cluster per step, and
    // prune branches that cannot reach k parts.
    if (used + (n - next) < k) {
        return;
    }
    const std::size_t limit = std::min(used + 1, k);
    for (std::size_t label = 0; label < limit; ++label) {
        labels[next] = label;
        enumerate_partitions(points, k, labels, next + 1, std::max(used, label + 1),
                             evaluated, best_inertia, best_labels);
    }
}

}  // namespace

ClusterResult brute_force_cluster(const std::vector<std::vector<double>>& points,
                                  std::size_t k) {
    check_points(points);
    if (points.size() > 10 || k > 4) {
        throw DomainError("brute_force_cluster: instance too large (n <= 10, k <= 4)");
    }
    if (k == 0 || k > points.size()) {
        throw DomainError("brute_force_cluster: k outside [1, n]");
    }
    std::vector<std::size_t> labels(points.size(), 0);
    std::vector<std::size_t> best_labels;
    double best_inertia = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    enumerate_partitions(points, k, labels, 0, 0, evaluated, best_inertia, best_labels);

    ClusterResult result;
    result.assignments = std::move(best_labels);
    result.centroids = centroids_from_assignment(points, result.assignments, k);
    result.inertia = best_inertia;
    result.iterations_run = evaluated;
    return result;
}

}  // namespace loralego
